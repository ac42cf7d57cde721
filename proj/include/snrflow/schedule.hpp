#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace snrflow {

// Rectified-flow noise schedule algebra. Everything here is closed form and
// evaluated in double precision; t=0 is clean data, t=1 is pure noise.

namespace detail {
inline void require(bool ok, const char* msg) {
    if (!ok) throw std::domain_error(msg);
}
}  // namespace detail

/// (alpha_t, sigma_t) = (1-t, t) for t in [0, 1].
inline std::pair<double, double> rf_coefficients(double t) {
    detail::require(t >= 0.0 && t <= 1.0, "rf_coefficients: t must lie in [0, 1]");
    return {1.0 - t, t};
}

/// lambda(t) = log(alpha^2 / sigma^2) = 2 log((1-t)/t), strictly decreasing on (0, 1).
inline double log_snr(double t) {
    detail::require(t > 0.0 && t < 1.0, "log_snr: t must lie in (0, 1)");
    return 2.0 * std::log((1.0 - t) / t);
}

/// Exact inverse of log_snr: t = 1 / (1 + exp(lambda / 2)).
inline double time_of_log_snr(double lambda) {
    detail::require(std::isfinite(lambda), "time_of_log_snr: lambda must be finite");
    return 1.0 / (1.0 + std::exp(lambda / 2.0));
}

/// t_new = k t / (1 + (k-1) t); monotone bijection of [0,1] with fixed endpoints.
inline double shift_time(double t, double k) {
    detail::require(k > 0.0, "shift_time: shift factor must be positive");
    detail::require(t >= 0.0 && t <= 1.0, "shift_time: t must lie in [0, 1]");
    return k * t / (1.0 + (k - 1.0) * t);
}

/// Equivalent shift in log-SNR space: lambda - 2 log k.
inline double shift_log_snr(double lambda, double k) {
    detail::require(k > 0.0, "shift_log_snr: shift factor must be positive");
    return lambda - 2.0 * std::log(k);
}

/// Rectified-flow schedule with a fixed time shift baked in at construction.
/// shift = 1 is the identity.
struct NoiseSchedule {
    double shift = 1.0;

    explicit NoiseSchedule(double shift_factor = 1.0) : shift(shift_factor) {
        detail::require(shift > 0.0, "NoiseSchedule: shift factor must be positive");
    }

    std::pair<double, double> coefficients(double t) const {
        return rf_coefficients(shift_time(t, shift));
    }
    double log_snr_at(double t) const { return log_snr(shift_time(t, shift)); }
};

}  // namespace snrflow
