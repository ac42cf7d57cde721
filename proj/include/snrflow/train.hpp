#pragma once

#include <optional>
#include <utility>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snrflow/diffusion.hpp"
#include "snrflow/lora.hpp"
#include "snrflow/net.hpp"
#include "snrflow/sampler.hpp"
#include "snrflow/styledata.hpp"

namespace snrflow {

// Training loops. Every Adam update consumes grad_accum micro-batches of
// batch_size items; each item draws its own noise level, noise tensor and
// condition dropout. Runs are bit-reproducible from (config, corpus).

struct LoraTrainConfig {
    std::vector<std::string> targets;  // empty = default target set
    int rank = 32;
    double alpha = 32.0;
};

enum class Objective { Dm, Dco };

struct TrainConfig {
    Objective objective = Objective::Dm;
    SnrSampler sampler = SnrSampler::logit_normal(0.0, 1.0);
    int steps = 300;
    double lr = 1e-4;
    int grad_accum = 4;
    int batch_size = 1;
    double p_drop = 0.1;
    OffsetNoiseConfig offset;
    double beta_t = 1.0;  // DCO strength
    std::optional<LoraTrainConfig> lora;
    std::uint64_t seed = 0;

    void validate() const {
        if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
        if (grad_accum < 1) throw std::invalid_argument("TrainConfig: grad_accum must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
    }
};

/// Raised when a loss turns non-finite; carries the trace collected so far.
struct TrainingDiverged : std::runtime_error {
    std::vector<double> loss_trace;
    explicit TrainingDiverged(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), loss_trace(std::move(trace)) {}
};

template <typename S>
struct PretrainResult {
    DenoiserParams<S> params;
    std::vector<double> loss_trace;
};

template <typename S>
struct FinetuneResult {
    LoraAdapter<S> adapter;
    std::vector<double> loss_trace;
};

namespace detail {

template <typename S>
std::vector<BatchItem<S>> draw_micro_batch(std::span<const DataPoint> data,
                                           const TrainConfig& cfg, RandomSource& rng,
                                           const ImageShape& shape) {
    std::vector<BatchItem<S>> items;
    items.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t idx = static_cast<std::size_t>(rng.raw() % data.size());
        const DataPoint& dp = data[idx];
        const SnrDraw draw = sample_one(cfg.sampler, rng);
        const VectorXd eps = sample_noise(rng, shape, cfg.offset);
        Condition cond =
            drop_condition(Condition{dp.content_id, dp.style_id}, rng, cfg.p_drop);
        items.push_back(make_batch_item<S>(dp.x0.cast<S>().eval(), cond, draw, eps));
    }
    return items;
}

}  // namespace detail

/// Trains every parameter with the dm objective under cfg.sampler.
template <typename S>
PretrainResult<S> pretrain(std::span<const DataPoint> corpus, const Architecture& arch,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
    RandomSource init_rng = RandomSource(cfg.seed).stream(0);
    RandomSource train_rng = RandomSource(cfg.seed).stream(1);

    PretrainResult<S> result;
    result.params = init<S>(arch, init_rng);
    AdamState<S> state = make_adam_state<S>(total_param_count(result.params));

    for (int step = 0; step < cfg.steps; ++step) {
        try {
            DenoiserGrads<S> grads = zeros_like(result.params);
            double loss = 0.0;
            for (int micro = 0; micro < cfg.grad_accum; ++micro) {
                auto items = detail::draw_micro_batch<S>(corpus, cfg, train_rng, arch.image);
                loss += dm_loss<S>(result.params, items, &grads);
            }
            loss /= cfg.grad_accum;
            for (auto& v : collect_tensors(grads))
                Eigen::Map<MatrixX<S>>(v.data, v.rows, v.cols) /= static_cast<S>(cfg.grad_accum);
            auto param_views = collect_tensors(result.params);
            auto grad_views = collect_tensors(std::as_const(grads));
            adam_step(param_views, grad_views, state, cfg.lr);
            result.loss_trace.push_back(loss);
        } catch (const std::runtime_error& e) {
            throw TrainingDiverged("pretrain aborted at step " + std::to_string(step) + ": " +
                                       e.what(),
                                   std::move(result.loss_trace));
        }
    }
    return result;
}

/// LoRA fine-tuning on reference images; base weights are never written.
/// Objective::Dco measures preference against the frozen base itself.
template <typename S>
FinetuneResult<S> finetune(const DenoiserParams<S>& base, std::span<const DataPoint> reference,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (!cfg.lora) throw std::invalid_argument("finetune: config must carry LoRA settings");
    if (reference.empty()) throw std::invalid_argument("finetune: empty reference set");

    RandomSource attach_rng = RandomSource(cfg.seed).stream(2);
    RandomSource train_rng = RandomSource(cfg.seed).stream(3);

    std::vector<std::string> targets = cfg.lora->targets;
    if (targets.empty()) targets = default_lora_targets(base);

    FinetuneResult<S> result;
    result.adapter = attach(base, targets, cfg.lora->rank, cfg.lora->alpha, attach_rng);
    AdamState<S> state = make_adam_state<S>(trainable_parameter_count(result.adapter));

    const DcoConfig dco{cfg.beta_t};
    for (int step = 0; step < cfg.steps; ++step) {
        try {
            LoraGrads<S> grads = zero_lora_grads(result.adapter);
            double loss = 0.0;
            for (int micro = 0; micro < cfg.grad_accum; ++micro) {
                auto items =
                    detail::draw_micro_batch<S>(reference, cfg, train_rng, base.arch.image);
                if (cfg.objective == Objective::Dco)
                    loss += dco_loss_adapted<S>(base, result.adapter, base, items, dco, &grads);
                else
                    loss += dm_loss_adapted<S>(base, result.adapter, items, &grads);
            }
            loss /= cfg.grad_accum;
            for (std::size_t i = 0; i < grads.dA.size(); ++i) {
                grads.dA[i] /= static_cast<S>(cfg.grad_accum);
                grads.dB[i] /= static_cast<S>(cfg.grad_accum);
            }
            auto param_views = collect_tensors(result.adapter);
            auto grad_views = collect_tensors(grads, result.adapter);
            adam_step(param_views, grad_views, state, cfg.lr);
            result.loss_trace.push_back(loss);
        } catch (const std::runtime_error& e) {
            throw TrainingDiverged("finetune aborted at step " + std::to_string(step) + ": " +
                                       e.what(),
                                   std::move(result.loss_trace));
        }
    }
    return result;
}

/// Mean of pre-computed micro-batch gradient sets applied as one Adam update.
/// Exposed so accumulation semantics can be tested in isolation.
template <typename S>
void accumulate_step(std::vector<TensorView<S>>& params,
                     const std::vector<std::vector<TensorView<const S>>>& micro_grads,
                     AdamState<S>& state, double lr) {
    if (micro_grads.empty()) throw std::invalid_argument("accumulate_step: no micro gradients");
    const auto& first = micro_grads.front();
    std::vector<MatrixX<S>> mean;
    mean.reserve(first.size());
    for (const auto& v : first)
        mean.push_back(Eigen::Map<const MatrixX<S>>(v.data, v.rows, v.cols));
    for (std::size_t m = 1; m < micro_grads.size(); ++m)
        for (std::size_t k = 0; k < first.size(); ++k)
            mean[k] += Eigen::Map<const MatrixX<S>>(micro_grads[m][k].data,
                                                    micro_grads[m][k].rows,
                                                    micro_grads[m][k].cols);
    std::vector<TensorView<const S>> mean_views;
    for (std::size_t k = 0; k < mean.size(); ++k) {
        mean[k] /= static_cast<S>(micro_grads.size());
        mean_views.push_back({first[k].name, mean[k].data(), mean[k].rows(), mean[k].cols()});
    }
    adam_step(params, mean_views, state, lr);
}

}  // namespace snrflow
