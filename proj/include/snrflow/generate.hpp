#pragma once

#include <cmath>
#include <cstdint>
#include <type_traits>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "snrflow/diffusion.hpp"
#include "snrflow/lora.hpp"
#include "snrflow/net.hpp"
#include "snrflow/schedule.hpp"

namespace snrflow {

// Euler integration of the learned velocity field from t=1 (noise) down to
// t=0, with classifier-free guidance and optional condition switching by
// step index.

struct GenerationConfig {
    int steps = 28;
    double guidance_scale = 7.0;
    double shift = 1.0;  // warps the time grid via t -> kt/(1+(k-1)t)
    std::uint64_t seed = 0;
};

struct SwitchPlan {
    Condition cond_early;
    Condition cond_late;
    double switch_fraction = 0.0;  // first ceil(f*steps) steps use cond_early
};

/// Decreasing grid of steps+1 times with exact endpoints 1 and 0; uniform for
/// shift = 1, warped otherwise.
inline std::vector<double> time_grid(int steps, double shift = 1.0) {
    if (steps < 1) throw std::invalid_argument("time_grid: steps must be >= 1");
    std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(steps - i) / steps;
        if (shift != 1.0) t = shift_time(t, shift);
        grid[static_cast<std::size_t>(i)] = t;
    }
    return grid;
}

/// v_u + s (v_c - v_u). Scales 0 and 1 short-circuit to a single forward pass.
template <typename S>
VectorX<S> guided_velocity(const DenoiserParams<S>& p,
                           std::type_identity_t<const LoraAdapter<S>*> adapter,
                           const VectorX<S>& x, double t, Condition cond, double s) {
    if (s < 0.0) throw std::invalid_argument("guided_velocity: guidance scale must be >= 0");
    auto eval = [&](Condition c) {
        return adapter ? adapted_forward(p, *adapter, x, t, c) : forward(p, x, t, c);
    };
    if (s == 1.0) return eval(cond);
    VectorX<S> v_u = eval(Condition{kNullId, kNullId});
    if (s == 0.0) return v_u;
    VectorX<S> v_c = eval(cond);
    return v_u + S(s) * (v_c - v_u);
}

/// Core integrator: x <- x - (t_i - t_{i+1}) * v(x, t_i, i), starting from the
/// given state at grid.front(). Aborts on non-finite state.
template <typename S, typename VelFn>
VectorX<S> euler_integrate(VelFn&& velocity, VectorX<S> x, std::span<const double> grid) {
    if (grid.size() < 2) throw std::invalid_argument("euler_integrate: need at least two times");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        VectorX<S> v = velocity(x, grid[i], static_cast<int>(i));
        x -= S(grid[i] - grid[i + 1]) * v;
        if (!x.allFinite())
            throw std::runtime_error("euler_integrate: non-finite state at step " +
                                     std::to_string(i));
    }
    return x;
}

template <typename S>
VectorX<S> euler_sample(const DenoiserParams<S>& p,
                        std::type_identity_t<const LoraAdapter<S>*> adapter,
                        Condition cond, const GenerationConfig& cfg, RandomSource& rng) {
    const std::vector<double> grid = time_grid(cfg.steps, cfg.shift);
    const VectorXd noise = rng.gaussian_vector(p.arch.input_dim());
    VectorX<S> x = noise.cast<S>();
    auto vel = [&](const VectorX<S>& state, double t, int) {
        return guided_velocity(p, adapter, state, t, cond, cfg.guidance_scale);
    };
    return euler_integrate<S>(vel, std::move(x), grid);
}

/// euler_sample with cond_early for the first ceil(f*steps) steps and
/// cond_late afterwards; f=0 and f=1 reduce to plain sampling bit-exactly.
template <typename S>
VectorX<S> switched_sample(const DenoiserParams<S>& p,
                           std::type_identity_t<const LoraAdapter<S>*> adapter,
                           const SwitchPlan& plan, const GenerationConfig& cfg,
                           RandomSource& rng) {
    if (plan.switch_fraction < 0.0 || plan.switch_fraction > 1.0)
        throw std::invalid_argument("switched_sample: switch fraction must lie in [0, 1]");
    const int n_early = static_cast<int>(std::ceil(plan.switch_fraction * cfg.steps));
    const std::vector<double> grid = time_grid(cfg.steps, cfg.shift);
    const VectorXd noise = rng.gaussian_vector(p.arch.input_dim());
    VectorX<S> x = noise.cast<S>();
    auto vel = [&](const VectorX<S>& state, double t, int step) {
        const Condition c = step < n_early ? plan.cond_early : plan.cond_late;
        return guided_velocity(p, adapter, state, t, c, cfg.guidance_scale);
    };
    return euler_integrate<S>(vel, std::move(x), grid);
}

}  // namespace snrflow
