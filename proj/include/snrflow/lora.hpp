#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "snrflow/net.hpp"

namespace snrflow {

// Low-rank adaptation attached by layer name. A targeted layer computes
// W h + b + (alpha/r) B (A h); base weights stay frozen while A and B train.
// A is Gaussian-initialized (sd 0.02), B starts at zero so attaching is a
// no-op until the first update.

template <typename S>
struct LoraTarget {
    std::string name;
    MatrixX<S> A;  // r x fan_in
    MatrixX<S> B;  // fan_out x r
};

template <typename S>
struct LoraAdapter {
    int rank = 32;
    double alpha = 32.0;
    std::vector<LoraTarget<S>> targets;

    double scale() const { return alpha / rank; }

    const LoraTarget<S>* find(const std::string& name) const {
        for (const auto& t : targets)
            if (t.name == name) return &t;
        return nullptr;
    }
};

/// Default target set: every hidden-block weight matrix plus the condition
/// projection. The output layer is left untouched.
template <typename S>
std::vector<std::string> default_lora_targets(const DenoiserParams<S>& p) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < p.blocks.size(); ++i)
        names.push_back("blocks." + std::to_string(i));
    names.push_back("cond_proj");
    return names;
}

template <typename S>
LoraAdapter<S> attach(const DenoiserParams<S>& p, const std::vector<std::string>& target_names,
                      int rank, double alpha, RandomSource& rng) {
    if (rank < 1) throw std::invalid_argument("attach: rank must be >= 1");
    if (target_names.empty()) throw std::invalid_argument("attach: no targets given");
    LoraAdapter<S> adapter;
    adapter.rank = rank;
    adapter.alpha = alpha;
    for (const auto& name : target_names) {
        const Linear<S>* layer = find_layer(p, name);
        if (!layer) throw std::invalid_argument("attach: unknown target layer '" + name + "'");
        LoraTarget<S> t;
        t.name = name;
        t.A.resize(rank, layer->weight.cols());
        for (Eigen::Index i = 0; i < t.A.size(); ++i)
            t.A.data()[i] = static_cast<S>(0.02 * rng.gaussian());
        t.B = MatrixX<S>::Zero(layer->weight.rows(), rank);
        adapter.targets.push_back(std::move(t));
    }
    return adapter;
}

template <typename S>
struct LoraGrads {
    std::vector<MatrixX<S>> dA;  // aligned with adapter.targets
    std::vector<MatrixX<S>> dB;
};

template <typename S>
LoraGrads<S> zero_lora_grads(const LoraAdapter<S>& adapter) {
    LoraGrads<S> g;
    for (const auto& t : adapter.targets) {
        g.dA.push_back(MatrixX<S>::Zero(t.A.rows(), t.A.cols()));
        g.dB.push_back(MatrixX<S>::Zero(t.B.rows(), t.B.cols()));
    }
    return g;
}

template <typename S>
Eigen::Index trainable_parameter_count(const LoraAdapter<S>& adapter) {
    Eigen::Index n = 0;
    for (const auto& t : adapter.targets) n += t.A.size() + t.B.size();
    return n;
}

template <typename S>
std::vector<TensorView<S>> collect_tensors(LoraAdapter<S>& adapter) {
    std::vector<TensorView<S>> views;
    for (auto& t : adapter.targets) {
        views.push_back({"lora." + t.name + ".A", t.A.data(), t.A.rows(), t.A.cols()});
        views.push_back({"lora." + t.name + ".B", t.B.data(), t.B.rows(), t.B.cols()});
    }
    return views;
}
template <typename S>
std::vector<TensorView<const S>> collect_tensors(const LoraAdapter<S>& adapter) {
    std::vector<TensorView<const S>> views;
    for (const auto& t : adapter.targets) {
        views.push_back({"lora." + t.name + ".A", t.A.data(), t.A.rows(), t.A.cols()});
        views.push_back({"lora." + t.name + ".B", t.B.data(), t.B.rows(), t.B.cols()});
    }
    return views;
}
template <typename S>
std::vector<TensorView<const S>> collect_tensors(const LoraGrads<S>& g, const LoraAdapter<S>& adapter) {
    std::vector<TensorView<const S>> views;
    for (std::size_t i = 0; i < adapter.targets.size(); ++i) {
        views.push_back({"lora." + adapter.targets[i].name + ".A",
                         g.dA[i].data(), g.dA[i].rows(), g.dA[i].cols()});
        views.push_back({"lora." + adapter.targets[i].name + ".B",
                         g.dB[i].data(), g.dB[i].rows(), g.dB[i].cols()});
    }
    return views;
}

template <typename S>
struct AdaptedCache {
    ForwardCache<S> base;
    std::map<std::string, VectorX<S>> ah;  // per-target A*input
};

namespace detail {
template <typename S>
struct LoraForwardHook {
    const LoraAdapter<S>* adapter;
    std::map<std::string, VectorX<S>>* ah;  // optional

    void add_delta(const std::string& name, const VectorX<S>& input, VectorX<S>& z) const {
        const LoraTarget<S>* t = adapter->find(name);
        if (!t) return;
        VectorX<S> a_in = t->A * input;
        z.noalias() += static_cast<S>(adapter->scale()) * (t->B * a_in);
        if (ah) (*ah)[name] = std::move(a_in);
    }
};
}  // namespace detail

template <typename S>
VectorX<S> adapted_forward(const DenoiserParams<S>& p, const LoraAdapter<S>& adapter,
                           const VectorX<S>& x_t, double t, Condition cond,
                           AdaptedCache<S>* cache = nullptr) {
    detail::LoraForwardHook<S> hook{&adapter, cache ? &cache->ah : nullptr};
    return forward_hooked(p, x_t, t, cond, cache ? &cache->base : nullptr, hook);
}

/// Gradients of the adapter parameters only; the base net receives none. The
/// cache must come from adapted_forward with the same adapter.
template <typename S>
void backward_adapter(const DenoiserParams<S>& p, const LoraAdapter<S>& adapter,
                      const AdaptedCache<S>& cache, const VectorX<S>& grad_out,
                      LoraGrads<S>& grads) {
    const ForwardCache<S>& c = cache.base;
    if (!c.populated) throw std::logic_error("backward_adapter: cache not populated");
    const S scale = static_cast<S>(adapter.scale());

    auto target_index = [&adapter](const std::string& name) -> int {
        for (std::size_t i = 0; i < adapter.targets.size(); ++i)
            if (adapter.targets[i].name == name) return static_cast<int>(i);
        return -1;
    };

    // Accumulate dA/dB at one matmul layer and return the input gradient
    // through the adapted effective weight W + scale*B*A.
    auto backprop_layer = [&](const std::string& name, const Linear<S>& layer,
                              const VectorX<S>& input, const VectorX<S>& gz) {
        VectorX<S> gin = layer.weight.transpose() * gz;
        const int ti = target_index(name);
        if (ti >= 0) {
            const LoraTarget<S>& t = adapter.targets[ti];
            const VectorX<S>& a_in = cache.ah.at(name);
            VectorX<S> bt_gz = t.B.transpose() * gz;
            grads.dB[ti].noalias() += scale * (gz * a_in.transpose());
            grads.dA[ti].noalias() += scale * (bt_gz * input.transpose());
            gin.noalias() += scale * (t.A.transpose() * bt_gz);
        }
        return gin;
    };

    VectorX<S> gh = backprop_layer("out", p.out, c.layer_in.back(), grad_out);
    for (int i = static_cast<int>(p.blocks.size()) - 1; i >= 0; --i) {
        VectorX<S> gz = gh.cwiseProduct(silu_grad(c.z[i]));
        gh = backprop_layer("blocks." + std::to_string(i), p.blocks[i], c.layer_in[i], gz);
    }
    VectorX<S> g_cp = gh.tail(p.arch.cond_dim());
    backprop_layer("cond_proj", p.cond_proj, c.cond_embed, g_cp);
}

/// Folds the adapter into the base weights: W <- W + (alpha/r) B A per target.
/// Applying it twice doubles the update; merging is additive, not idempotent.
template <typename S>
DenoiserParams<S> merge(const DenoiserParams<S>& p, const LoraAdapter<S>& adapter) {
    DenoiserParams<S> merged = p;
    for (const auto& t : adapter.targets) {
        Linear<S>* layer = find_layer(merged, t.name);
        if (!layer) throw std::invalid_argument("merge: unknown target layer '" + t.name + "'");
        layer->weight.noalias() += static_cast<S>(adapter.scale()) * (t.B * t.A);
    }
    return merged;
}

}  // namespace snrflow
