#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "snrflow/lora.hpp"
#include "snrflow/net.hpp"
#include "snrflow/sampler.hpp"
#include "snrflow/stats.hpp"

namespace snrflow {

// Rectified-flow forward process, velocity targets and the training losses.
// Squared error of one item is the per-element mean ||pred - target||^2 / D;
// batch losses average over items.

template <typename S>
VectorX<S> forward_diffuse(const VectorX<S>& x0, const VectorX<S>& eps, double t) {
    if (x0.size() != eps.size())
        throw std::invalid_argument("forward_diffuse: shape mismatch");
    if (t < 0.0 || t > 1.0)
        throw std::domain_error("forward_diffuse: t must lie in [0, 1]");
    return (S(1) - S(t)) * x0 + S(t) * eps;
}

template <typename S>
VectorX<S> velocity_target(const VectorX<S>& x0, const VectorX<S>& eps) {
    if (x0.size() != eps.size())
        throw std::invalid_argument("velocity_target: shape mismatch");
    return eps - x0;
}

struct OffsetNoiseConfig {
    double scale = 0.0;  // 0 disables the offset; baselines use 0.1 or 0.01
};

/// Standard Gaussian noise, optionally plus scale * c per channel with one
/// Gaussian scalar c broadcast over all pixel positions. With scale = 0 the
/// generator stream is identical to plain Gaussian sampling.
inline VectorXd sample_noise(RandomSource& rng, const ImageShape& shape,
                             const OffsetNoiseConfig& offset = {}) {
    if (offset.scale < 0.0)
        throw std::invalid_argument("sample_noise: offset scale must be >= 0");
    VectorXd eps = rng.gaussian_vector(shape.size());
    if (offset.scale > 0.0) {
        for (int c = 0; c < shape.channels; ++c) {
            const double shift = offset.scale * rng.gaussian();
            eps.segment(static_cast<Eigen::Index>(c) * shape.pixels(), shape.pixels())
                .array() += shift;
        }
    }
    return eps;
}

template <typename S>
struct BatchItem {
    VectorX<S> x0;
    Condition cond;
    double t = 0.0;
    double lambda = 0.0;
    VectorX<S> eps;
    VectorX<S> x_t;
    VectorX<S> target_v;
};

template <typename S>
BatchItem<S> make_batch_item(const VectorX<S>& x0, Condition cond, const SnrDraw& draw,
                             const VectorXd& eps) {
    BatchItem<S> item;
    item.x0 = x0;
    item.cond = cond;
    item.t = draw.t;
    item.lambda = draw.log_snr;
    item.eps = eps.cast<S>();
    item.x_t = forward_diffuse(item.x0, item.eps, item.t);
    item.target_v = velocity_target(item.x0, item.eps);
    return item;
}

/// Mean over the batch of per-element MSE between predicted and target
/// velocity. Gradients (if requested) are accumulated into `grads`.
template <typename S>
double dm_loss(const DenoiserParams<S>& p, std::span<const BatchItem<S>> batch,
               DenoiserGrads<S>* grads = nullptr) {
    if (batch.empty()) throw std::invalid_argument("dm_loss: empty batch");
    const double n = static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        ForwardCache<S> cache;
        VectorX<S> pred = forward(p, item.x_t, item.t, item.cond, grads ? &cache : nullptr);
        VectorX<S> r = pred - item.target_v;
        const double dim = static_cast<double>(r.size());
        loss += r.squaredNorm() / dim;
        if (grads) {
            VectorX<S> gout = (S(2.0 / (dim * n))) * r;
            backward(p, cache, gout, *grads);
        }
    }
    loss /= n;
    if (!std::isfinite(loss)) throw std::runtime_error("dm_loss: non-finite loss");
    return loss;
}

/// dm loss with a LoRA adapter on top of frozen base weights; gradients flow
/// to the adapter only.
template <typename S>
double dm_loss_adapted(const DenoiserParams<S>& p, const LoraAdapter<S>& adapter,
                       std::span<const BatchItem<S>> batch, LoraGrads<S>* grads = nullptr) {
    if (batch.empty()) throw std::invalid_argument("dm_loss_adapted: empty batch");
    const double n = static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        AdaptedCache<S> cache;
        VectorX<S> pred = adapted_forward(p, adapter, item.x_t, item.t, item.cond,
                                          grads ? &cache : nullptr);
        VectorX<S> r = pred - item.target_v;
        const double dim = static_cast<double>(r.size());
        loss += r.squaredNorm() / dim;
        if (grads) {
            VectorX<S> gout = (S(2.0 / (dim * n))) * r;
            backward_adapter(p, adapter, cache, gout, *grads);
        }
    }
    loss /= n;
    if (!std::isfinite(loss)) throw std::runtime_error("dm_loss_adapted: non-finite loss");
    return loss;
}

struct DcoConfig {
    double beta_t = 1.0;  // preference strength; w(t) is fixed to 1
};

inline double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}
inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Relative-preference loss: mean of -log sigmoid(-beta * (se_theta - se_phi))
/// = mean softplus(beta * (se_theta - se_phi)), with per-item squared errors.
/// theta = base + adapter, phi = frozen reference params; only the adapter
/// receives gradients.
template <typename S>
double dco_loss_adapted(const DenoiserParams<S>& theta_base, const LoraAdapter<S>& adapter,
                        const DenoiserParams<S>& phi, std::span<const BatchItem<S>> batch,
                        const DcoConfig& cfg, LoraGrads<S>* grads = nullptr) {
    if (batch.empty()) throw std::invalid_argument("dco_loss_adapted: empty batch");
    if (cfg.beta_t <= 0.0) throw std::invalid_argument("dco_loss_adapted: beta_t must be > 0");
    const double n = static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        AdaptedCache<S> cache;
        VectorX<S> pred_t = adapted_forward(theta_base, adapter, item.x_t, item.t, item.cond,
                                            grads ? &cache : nullptr);
        VectorX<S> pred_p = forward(phi, item.x_t, item.t, item.cond);
        VectorX<S> r_t = pred_t - item.target_v;
        VectorX<S> r_p = pred_p - item.target_v;
        const double dim = static_cast<double>(r_t.size());
        const double se_t = r_t.squaredNorm() / dim;
        const double se_p = r_p.squaredNorm() / dim;
        const double z = cfg.beta_t * (se_t - se_p);
        loss += softplus(z);
        if (grads) {
            const double dz = sigmoid(z) * cfg.beta_t;  // d softplus / d se_theta
            VectorX<S> gout = (S(dz * 2.0 / (dim * n))) * r_t;
            backward_adapter(theta_base, adapter, cache, gout, *grads);
        }
    }
    loss /= n;
    if (!std::isfinite(loss)) throw std::runtime_error("dco_loss_adapted: non-finite loss");
    return loss;
}

/// Plain-parameter variant used by gradient checks: theta is an ordinary
/// parameter set (no adapter); phi stays fixed.
template <typename S>
double dco_loss(const DenoiserParams<S>& theta, const DenoiserParams<S>& phi,
                std::span<const BatchItem<S>> batch, const DcoConfig& cfg,
                DenoiserGrads<S>* grads = nullptr) {
    if (batch.empty()) throw std::invalid_argument("dco_loss: empty batch");
    if (cfg.beta_t <= 0.0) throw std::invalid_argument("dco_loss: beta_t must be > 0");
    const double n = static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        ForwardCache<S> cache;
        VectorX<S> pred_t = forward(theta, item.x_t, item.t, item.cond, grads ? &cache : nullptr);
        VectorX<S> pred_p = forward(phi, item.x_t, item.t, item.cond);
        VectorX<S> r_t = pred_t - item.target_v;
        VectorX<S> r_p = pred_p - item.target_v;
        const double dim = static_cast<double>(r_t.size());
        const double z = cfg.beta_t * (r_t.squaredNorm() - r_p.squaredNorm()) / dim;
        loss += softplus(z);
        if (grads) {
            const double dz = sigmoid(z) * cfg.beta_t;
            VectorX<S> gout = (S(dz * 2.0 / (dim * n))) * r_t;
            backward(theta, cache, gout, *grads);
        }
    }
    loss /= n;
    if (!std::isfinite(loss)) throw std::runtime_error("dco_loss: non-finite loss");
    return loss;
}

// ---- Loss-as-integral machinery ----
//
// The training objective E_{lambda ~ p}[err(lambda)] can equivalently be
// estimated as E_{lambda ~ U(lo, hi)}[(hi - lo) p(lambda) err(lambda)]; the
// density acts as an importance weight. Both estimators are exposed so they
// can be cross-checked.

using NoiseErrFn = std::function<double(double lambda, double t, RandomSource&)>;

inline McEstimate direct_loss_estimate(const SnrSampler& sampler, const NoiseErrFn& err,
                                       RandomSource& rng, int n) {
    if (n < 1) throw std::invalid_argument("direct_loss_estimate: n must be >= 1");
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const SnrDraw d = sample_one(sampler, rng);
        values.push_back(err(d.log_snr, d.t, rng));
    }
    return mc_estimate(values);
}

inline McEstimate importance_weighted_loss_estimate(const SnrSampler& sampler,
                                                    const NoiseErrFn& err, RandomSource& rng,
                                                    int n, double lambda_min, double lambda_max) {
    if (n < 1) throw std::invalid_argument("importance_weighted_loss_estimate: n must be >= 1");
    if (!(lambda_min < lambda_max))
        throw std::invalid_argument("importance_weighted_loss_estimate: bad lambda range");
    const double width = lambda_max - lambda_min;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double lambda = lambda_min + width * rng.uniform_open();
        const double t = time_of_log_snr(lambda);
        values.push_back(width * density_lambda(sampler, lambda) * err(lambda, t, rng));
    }
    return mc_estimate(values);
}

/// Squared velocity-prediction error of a fixed (x0, cond) pair at a given
/// noise level, with the noise drawn from the passed random source.
template <typename S>
NoiseErrFn make_velocity_sq_err(const DenoiserParams<S>& p, const VectorX<S>& x0,
                                Condition cond, OffsetNoiseConfig offset = {}) {
    ImageShape shape = p.arch.image;
    return [&p, x0, cond, offset, shape](double, double t, RandomSource& rng) {
        VectorXd eps = sample_noise(rng, shape, offset);
        VectorX<S> e = eps.cast<S>();
        VectorX<S> x_t = forward_diffuse(x0, e, t);
        VectorX<S> pred = forward(p, x_t, t, cond);
        VectorX<S> r = pred - velocity_target(x0, e);
        return static_cast<double>(r.squaredNorm()) / static_cast<double>(r.size());
    };
}

/// Eq.-style importance-weighted objective of a network on one data point.
template <typename S>
double importance_weighted_loss(const DenoiserParams<S>& p, const VectorX<S>& x0, Condition cond,
                                const SnrSampler& sampler, RandomSource& rng, int n,
                                double lambda_min, double lambda_max) {
    return importance_weighted_loss_estimate(sampler, make_velocity_sq_err(p, x0, cond), rng, n,
                                             lambda_min, lambda_max)
        .mean;
}

}  // namespace snrflow
