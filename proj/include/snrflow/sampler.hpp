#pragma once

#include <string>
#include <vector>

#include "snrflow/rng.hpp"
#include "snrflow/schedule.hpp"

namespace snrflow {

// Training-time distributions over noise levels. Every variant induces a
// distribution over the log-SNR lambda (and, through the rectified-flow map
// t = 1/(1+exp(lambda/2)), over the timestep t). All variants except
// UniformTime are Gaussian in lambda:
//
//   StyleFriendly(mu, sigma):    lambda ~ N(mu, sigma^2)
//   LogitNormal(m, s):           logit(t) ~ N(m, s^2)   =>  lambda ~ N(-2m, 4s^2)
//   EdmLogNormal(p_mean, p_std): log(noise std) ~ N(p_mean, p_std^2)
//                                                       =>  lambda ~ N(-2 p_mean, 4 p_std^2)
//
// A shift factor k translates lambda by -2 log k, matching the timestep warp
// t -> kt/(1+(k-1)t).

enum class SnrSamplerKind { UniformTime, LogitNormal, StyleFriendly, EdmLogNormal };

struct SnrSampler {
    SnrSamplerKind kind = SnrSamplerKind::UniformTime;
    double loc   = 0.0;  // mu / m / p_mean (unused for UniformTime)
    double scale = 1.0;  // sigma / s / p_std, strictly positive
    double shift = 1.0;  // shift factor k > 0

    static SnrSampler uniform_time(double shift = 1.0);
    static SnrSampler logit_normal(double m, double s, double shift = 1.0);
    static SnrSampler style_friendly(double mu, double sigma, double shift = 1.0);
    static SnrSampler edm_log_normal(double p_mean, double p_std, double shift = 1.0);

    bool gaussian_in_lambda() const { return kind != SnrSamplerKind::UniformTime; }

    /// Mean of the induced lambda distribution (Gaussian variants only),
    /// shift included.
    double lambda_mean() const;
    /// Standard deviation of the induced lambda distribution (Gaussian variants only).
    double lambda_sd() const;
};

struct SnrDraw {
    double log_snr;
    double t;
};

SnrDraw sample_one(const SnrSampler& sampler, RandomSource& rng);
std::vector<SnrDraw> sample(const SnrSampler& sampler, RandomSource& rng, int n);

/// Closed-form density of lambda under the sampler.
double density_lambda(const SnrSampler& sampler, double lambda);

/// Density of t, i.e. density_lambda(lambda(t)) * 2/(t(1-t)). Requires t in (0,1).
double density_time(const SnrSampler& sampler, double t);

/// Closed-form CDF P(lambda <= x); used by statistical checks and histogram bins.
double cdf_lambda(const SnrSampler& sampler, double lambda);

/// Midpoint-rule density table: x[i] is the centre of the i-th of `grid`
/// equal cells, so sum(p) * (hi-lo)/grid approximates the integral.
struct DensityTable {
    std::vector<double> x;
    std::vector<double> p;
    double cell_width = 0.0;
};

DensityTable lambda_density_table(const SnrSampler& sampler, int grid,
                                  double lambda_lo = -15.0, double lambda_hi = 10.0);
DensityTable time_density_table(const SnrSampler& sampler, int grid);

}  // namespace snrflow
