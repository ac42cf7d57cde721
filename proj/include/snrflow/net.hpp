#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "snrflow/rng.hpp"
#include "snrflow/types.hpp"

namespace snrflow {

// Small conditional velocity-prediction MLP. The input of the first block is
// the concatenation [flattened x_t | Fourier time features | projected
// condition embeddings]; hidden blocks use x*sigmoid(x); the output layer is
// linear and predicts a velocity of the same shape as x_t.

constexpr int kNullId = -1;

struct Condition {
    int content = kNullId;
    int style   = kNullId;
    bool operator==(const Condition&) const = default;
};

struct Architecture {
    ImageShape image;
    std::vector<int> hidden_widths{256, 256};
    int time_embed_dim = 32;
    int n_content      = 4;
    int n_style        = 4;
    int cond_embed_dim = 16;

    int input_dim() const { return image.size(); }
    int cond_vocab() const { return n_content + n_style + 1; }
    int null_row() const { return n_content + n_style; }
    int cond_dim() const { return 2 * cond_embed_dim; }
    int first_block_in() const { return input_dim() + time_embed_dim + cond_dim(); }

    void validate() const {
        if (image.channels < 1 || image.height < 1 || image.width < 1)
            throw std::invalid_argument("Architecture: image dims must be >= 1");
        if (hidden_widths.empty())
            throw std::invalid_argument("Architecture: need at least one hidden layer");
        for (int w : hidden_widths)
            if (w < 1) throw std::invalid_argument("Architecture: hidden width must be >= 1");
        if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
            throw std::invalid_argument("Architecture: time_embed_dim must be even and >= 2");
        if (n_content < 1 || n_style < 1 || cond_embed_dim < 1)
            throw std::invalid_argument("Architecture: condition dims must be >= 1");
    }
    bool operator==(const Architecture&) const = default;
};

template <typename S>
struct Linear {
    MatrixX<S> weight;  // fan_out x fan_in
    VectorX<S> bias;    // fan_out
};

template <typename S>
struct DenoiserParams {
    Architecture arch;
    Linear<S> cond_proj;          // cond_dim -> cond_dim
    std::vector<Linear<S>> blocks;
    Linear<S> out;
    MatrixX<S> cond_embed;        // cond_vocab x cond_embed_dim, one row per token
};

template <typename S>
using DenoiserGrads = DenoiserParams<S>;

/// Non-owning named view over one parameter tensor; order is the canonical
/// serialization/optimizer order.
template <typename S>
struct TensorView {
    std::string name;
    S* data = nullptr;
    Eigen::Index rows = 0, cols = 0;
    Eigen::Index size() const { return rows * cols; }
};

namespace detail {
template <typename S, typename P>
std::vector<TensorView<S>> collect_impl(P& p) {
    std::vector<TensorView<S>> views;
    auto add = [&views](const std::string& name, auto& m) {
        views.push_back({name, m.data(), m.rows(), m.cols()});
    };
    add("cond_proj.weight", p.cond_proj.weight);
    add("cond_proj.bias", p.cond_proj.bias);
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        add("blocks." + std::to_string(i) + ".weight", p.blocks[i].weight);
        add("blocks." + std::to_string(i) + ".bias", p.blocks[i].bias);
    }
    add("out.weight", p.out.weight);
    add("out.bias", p.out.bias);
    add("embed.cond", p.cond_embed);
    return views;
}
}  // namespace detail

template <typename S>
std::vector<TensorView<S>> collect_tensors(DenoiserParams<S>& p) {
    return detail::collect_impl<S>(p);
}
template <typename S>
std::vector<TensorView<const S>> collect_tensors(const DenoiserParams<S>& p) {
    return detail::collect_impl<const S>(p);
}

template <typename S>
Eigen::Index total_param_count(const DenoiserParams<S>& p) {
    Eigen::Index n = 0;
    for (const auto& v : collect_tensors(p)) n += v.size();
    return n;
}

/// Weight matrices addressable by layer name (LoRA targets and diagnostics).
template <typename S>
Linear<S>* find_layer(DenoiserParams<S>& p, const std::string& name) {
    if (name == "cond_proj") return &p.cond_proj;
    if (name == "out") return &p.out;
    for (std::size_t i = 0; i < p.blocks.size(); ++i)
        if (name == "blocks." + std::to_string(i)) return &p.blocks[i];
    return nullptr;
}
template <typename S>
const Linear<S>* find_layer(const DenoiserParams<S>& p, const std::string& name) {
    return find_layer(const_cast<DenoiserParams<S>&>(p), name);
}

template <typename S>
std::vector<std::string> layer_names(const DenoiserParams<S>& p) {
    std::vector<std::string> names{"cond_proj"};
    for (std::size_t i = 0; i < p.blocks.size(); ++i)
        names.push_back("blocks." + std::to_string(i));
    names.push_back("out");
    return names;
}

template <typename S>
DenoiserParams<S> zeros_like(const DenoiserParams<S>& p) {
    DenoiserParams<S> z = p;
    for (auto& v : collect_tensors(z))
        Eigen::Map<MatrixX<S>>(v.data, v.rows, v.cols).setZero();
    return z;
}

template <typename S>
bool all_finite(const DenoiserParams<S>& p) {
    for (const auto& v : collect_tensors(p))
        if (!Eigen::Map<const MatrixX<S>>(v.data, v.rows, v.cols).allFinite()) return false;
    return true;
}

/// He-initialized weights (variance 2/fan_in), zero biases, Gaussian
/// embeddings with variance 0.02. Draw order is the canonical tensor order.
template <typename S>
DenoiserParams<S> init(const Architecture& arch, RandomSource& rng) {
    arch.validate();
    DenoiserParams<S> p;
    p.arch = arch;

    auto make_linear = [&rng](int fan_out, int fan_in) {
        Linear<S> l;
        l.weight.resize(fan_out, fan_in);
        const double sd = std::sqrt(2.0 / fan_in);
        for (Eigen::Index i = 0; i < l.weight.size(); ++i)
            l.weight.data()[i] = static_cast<S>(sd * rng.gaussian());
        l.bias = VectorX<S>::Zero(fan_out);
        return l;
    };

    p.cond_proj = make_linear(arch.cond_dim(), arch.cond_dim());
    int in_dim = arch.first_block_in();
    for (int w : arch.hidden_widths) {
        p.blocks.push_back(make_linear(w, in_dim));
        in_dim = w;
    }
    p.out = make_linear(arch.input_dim(), in_dim);

    p.cond_embed.resize(arch.cond_vocab(), arch.cond_embed_dim);
    const double embed_sd = std::sqrt(0.02);
    for (Eigen::Index i = 0; i < p.cond_embed.size(); ++i)
        p.cond_embed.data()[i] = static_cast<S>(embed_sd * rng.gaussian());
    return p;
}

/// Sin/cos features of t at dim/2 geometric frequencies spanning [1, 1e4].
inline VectorXd time_features(double t, int dim) {
    if (dim < 2 || dim % 2 != 0)
        throw std::invalid_argument("time_features: dim must be even and >= 2");
    const int m = dim / 2;
    VectorXd f(dim);
    for (int j = 0; j < m; ++j) {
        const double freq = m == 1 ? 1.0 : std::pow(10.0, 4.0 * j / (m - 1));
        f[j]     = std::sin(freq * t);
        f[m + j] = std::cos(freq * t);
    }
    return f;
}

template <typename S>
VectorX<S> silu(const VectorX<S>& z) {
    return (z.array() / (S(1) + (-z.array()).exp())).matrix();
}
template <typename S>
VectorX<S> silu_grad(const VectorX<S>& z) {
    const auto sig = S(1) / (S(1) + (-z.array()).exp());
    return (sig * (S(1) + z.array() * (S(1) - sig))).matrix();
}

template <typename S>
struct ForwardCache {
    double t = 0.0;
    Condition cond;
    int content_row = 0, style_row = 0;
    VectorX<S> x_in;
    VectorX<S> time_feat;
    VectorX<S> cond_embed;              // concatenated token rows
    VectorX<S> cond_proj_out;
    std::vector<VectorX<S>> layer_in;   // input to blocks[i]; back() feeds `out`
    std::vector<VectorX<S>> z;          // hidden pre-activations
    VectorX<S> out;
    bool populated = false;
};

namespace detail {
template <typename S>
void check_condition(const Architecture& arch, Condition c) {
    const bool content_ok = c.content == kNullId || (c.content >= 0 && c.content < arch.n_content);
    const bool style_ok   = c.style == kNullId || (c.style >= 0 && c.style < arch.n_style);
    if (!content_ok || !style_ok)
        throw std::invalid_argument("forward: condition id outside vocabulary");
}

struct NoHook {
    template <typename S>
    void add_delta(const std::string&, const VectorX<S>&, VectorX<S>&) const {}
};
}  // namespace detail

/// Forward pass. `hook.add_delta(layer_name, input, z)` lets adapters add a
/// low-rank contribution to any matmul layer's pre-activation.
template <typename S, typename Hook>
VectorX<S> forward_hooked(const DenoiserParams<S>& p, const VectorX<S>& x_t, double t,
                          Condition cond, ForwardCache<S>* cache, Hook&& hook) {
    const Architecture& arch = p.arch;
    if (x_t.size() != arch.input_dim())
        throw std::invalid_argument("forward: x_t has wrong size");
    detail::check_condition<S>(arch, cond);

    const int content_row = cond.content == kNullId ? arch.null_row() : cond.content;
    const int style_row   = cond.style == kNullId ? arch.null_row() : arch.n_content + cond.style;

    VectorX<S> ce(arch.cond_dim());
    ce.head(arch.cond_embed_dim) = p.cond_embed.row(content_row).transpose();
    ce.tail(arch.cond_embed_dim) = p.cond_embed.row(style_row).transpose();

    VectorX<S> cp = p.cond_proj.weight * ce + p.cond_proj.bias;
    hook.add_delta("cond_proj", ce, cp);

    VectorX<S> tf = time_features(t, arch.time_embed_dim).cast<S>();

    VectorX<S> in0(arch.first_block_in());
    in0 << x_t, tf, cp;

    std::vector<VectorX<S>> layer_in;
    std::vector<VectorX<S>> zs;
    layer_in.push_back(in0);
    VectorX<S> h = in0;
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        VectorX<S> z = p.blocks[i].weight * h + p.blocks[i].bias;
        hook.add_delta("blocks." + std::to_string(i), h, z);
        zs.push_back(z);
        h = silu(z);
        layer_in.push_back(h);
    }
    VectorX<S> v = p.out.weight * h + p.out.bias;
    hook.add_delta("out", h, v);

    if (cache) {
        cache->t = t;
        cache->cond = cond;
        cache->content_row = content_row;
        cache->style_row = style_row;
        cache->x_in = x_t;
        cache->time_feat = std::move(tf);
        cache->cond_embed = std::move(ce);
        cache->cond_proj_out = std::move(cp);
        cache->layer_in = std::move(layer_in);
        cache->z = std::move(zs);
        cache->out = v;
        cache->populated = true;
    }
    return v;
}

template <typename S>
VectorX<S> forward(const DenoiserParams<S>& p, const VectorX<S>& x_t, double t,
                   Condition cond, ForwardCache<S>* cache = nullptr) {
    return forward_hooked(p, x_t, t, cond, cache, detail::NoHook{});
}

/// Analytic gradients of every parameter given d(loss)/d(output). Accumulates
/// into `grads` so batched calls can share one gradient buffer.
template <typename S>
void backward(const DenoiserParams<S>& p, const ForwardCache<S>& cache,
              const VectorX<S>& grad_out, DenoiserGrads<S>& grads) {
    if (!cache.populated) throw std::logic_error("backward: forward cache not populated");
    const Architecture& arch = p.arch;

    grads.out.weight.noalias() += grad_out * cache.layer_in.back().transpose();
    grads.out.bias += grad_out;
    VectorX<S> gh = p.out.weight.transpose() * grad_out;

    for (int i = static_cast<int>(p.blocks.size()) - 1; i >= 0; --i) {
        VectorX<S> gz = gh.cwiseProduct(silu_grad(cache.z[i]));
        grads.blocks[i].weight.noalias() += gz * cache.layer_in[i].transpose();
        grads.blocks[i].bias += gz;
        gh = p.blocks[i].weight.transpose() * gz;
    }

    // gh is now the gradient of the assembled first-block input.
    VectorX<S> g_cp = gh.tail(arch.cond_dim());
    grads.cond_proj.weight.noalias() += g_cp * cache.cond_embed.transpose();
    grads.cond_proj.bias += g_cp;
    VectorX<S> g_ce = p.cond_proj.weight.transpose() * g_cp;
    grads.cond_embed.row(cache.content_row) += g_ce.head(arch.cond_embed_dim).transpose();
    grads.cond_embed.row(cache.style_row) += g_ce.tail(arch.cond_embed_dim).transpose();
}

template <typename S>
DenoiserGrads<S> backward(const DenoiserParams<S>& p, const ForwardCache<S>& cache,
                          const VectorX<S>& grad_out) {
    DenoiserGrads<S> grads = zeros_like(p);
    backward(p, cache, grad_out, grads);
    return grads;
}

// ---- Adam ----

template <typename S>
struct AdamState {
    VectorX<S> m, v;   // concatenated over the canonical tensor order
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <typename S>
AdamState<S> make_adam_state(Eigen::Index total_size) {
    AdamState<S> st;
    st.m = VectorX<S>::Zero(total_size);
    st.v = VectorX<S>::Zero(total_size);
    return st;
}

/// One bias-corrected Adam update over a view list; grads must align with
/// params view-for-view. Rejects non-finite gradients.
template <typename S>
void adam_step(std::vector<TensorView<S>>& params,
               const std::vector<TensorView<const S>>& grads,
               AdamState<S>& state, double lr) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: view lists differ");
    Eigen::Index total = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size())
            throw std::invalid_argument("adam_step: tensor size mismatch at " + params[k].name);
        total += params[k].size();
    }
    if (state.m.size() != total)
        throw std::invalid_argument("adam_step: state size mismatch");
    for (const auto& g : grads)
        if (!Eigen::Map<const MatrixX<S>>(g.data, g.rows, g.cols).allFinite())
            throw std::runtime_error("adam_step: non-finite gradient in " + g.name);

    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    Eigen::Index off = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        S* w = params[k].data;
        const S* g = grads[k].data;
        for (Eigen::Index i = 0; i < params[k].size(); ++i) {
            S& m = state.m[off + i];
            S& v = state.v[off + i];
            m = static_cast<S>(b1 * m + (1.0 - b1) * g[i]);
            v = static_cast<S>(b2 * v + (1.0 - b2) * g[i] * g[i]);
            const double mhat = m / c1;
            const double vhat = v / c2;
            w[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + state.eps));
        }
        off += params[k].size();
    }
}

/// Classifier-free-guidance dropout: with probability p_drop both ids are
/// replaced by the null token.
inline Condition drop_condition(Condition cond, RandomSource& rng, double p_drop) {
    if (p_drop < 0.0 || p_drop > 1.0)
        throw std::invalid_argument("drop_condition: p_drop must lie in [0, 1]");
    if (p_drop > 0.0 && rng.uniform() < p_drop) return Condition{kNullId, kNullId};
    return cond;
}

}  // namespace snrflow
