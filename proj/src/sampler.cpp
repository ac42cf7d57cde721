#include "snrflow/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "snrflow/stats.hpp"

namespace snrflow {

namespace {
void check_params(const SnrSampler& s) {
    if (s.kind != SnrSamplerKind::UniformTime && s.scale <= 0.0)
        throw std::invalid_argument("SnrSampler: scale parameter must be positive");
    if (s.shift <= 0.0)
        throw std::invalid_argument("SnrSampler: shift factor must be positive");
}
}  // namespace

SnrSampler SnrSampler::uniform_time(double shift) {
    SnrSampler s{SnrSamplerKind::UniformTime, 0.0, 1.0, shift};
    check_params(s);
    return s;
}
SnrSampler SnrSampler::logit_normal(double m, double sd, double shift) {
    SnrSampler s{SnrSamplerKind::LogitNormal, m, sd, shift};
    check_params(s);
    return s;
}
SnrSampler SnrSampler::style_friendly(double mu, double sigma, double shift) {
    SnrSampler s{SnrSamplerKind::StyleFriendly, mu, sigma, shift};
    check_params(s);
    return s;
}
SnrSampler SnrSampler::edm_log_normal(double p_mean, double p_std, double shift) {
    SnrSampler s{SnrSamplerKind::EdmLogNormal, p_mean, p_std, shift};
    check_params(s);
    return s;
}

double SnrSampler::lambda_mean() const {
    double mean = 0.0;
    switch (kind) {
        case SnrSamplerKind::StyleFriendly: mean = loc; break;
        case SnrSamplerKind::LogitNormal:   mean = -2.0 * loc; break;
        case SnrSamplerKind::EdmLogNormal:  mean = -2.0 * loc; break;
        case SnrSamplerKind::UniformTime:
            throw std::logic_error("lambda_mean: UniformTime is not Gaussian in lambda");
    }
    return mean - 2.0 * std::log(shift);
}

double SnrSampler::lambda_sd() const {
    switch (kind) {
        case SnrSamplerKind::StyleFriendly: return scale;
        case SnrSamplerKind::LogitNormal:   return 2.0 * scale;
        case SnrSamplerKind::EdmLogNormal:  return 2.0 * scale;
        case SnrSamplerKind::UniformTime:
            throw std::logic_error("lambda_sd: UniformTime is not Gaussian in lambda");
    }
    return 0.0;
}

SnrDraw sample_one(const SnrSampler& sampler, RandomSource& rng) {
    check_params(sampler);
    double lambda = 0.0;
    switch (sampler.kind) {
        case SnrSamplerKind::StyleFriendly:
            lambda = sampler.loc + sampler.scale * rng.gaussian();
            break;
        case SnrSamplerKind::LogitNormal:
            lambda = -2.0 * (sampler.loc + sampler.scale * rng.gaussian());
            break;
        case SnrSamplerKind::EdmLogNormal:
            lambda = -2.0 * (sampler.loc + sampler.scale * rng.gaussian());
            break;
        case SnrSamplerKind::UniformTime:
            lambda = log_snr(rng.uniform_open());
            break;
    }
    if (sampler.shift != 1.0) lambda = shift_log_snr(lambda, sampler.shift);
    return {lambda, time_of_log_snr(lambda)};
}

std::vector<SnrDraw> sample(const SnrSampler& sampler, RandomSource& rng, int n) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    std::vector<SnrDraw> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sample_one(sampler, rng));
    return out;
}

double density_lambda(const SnrSampler& sampler, double lambda) {
    check_params(sampler);
    if (!std::isfinite(lambda))
        throw std::domain_error("density_lambda: lambda must be finite");
    if (sampler.gaussian_in_lambda())
        return normal_pdf(lambda, sampler.lambda_mean(), sampler.lambda_sd());
    // UniformTime: p(lambda) = |dt/dlambda| = t(1-t)/2 at the unshifted lambda.
    const double unshifted = lambda + 2.0 * std::log(sampler.shift);
    const double t = time_of_log_snr(unshifted);
    return t * (1.0 - t) / 2.0;
}

double density_time(const SnrSampler& sampler, double t) {
    if (!(t > 0.0 && t < 1.0))
        throw std::domain_error("density_time: t must lie in (0, 1)");
    return density_lambda(sampler, log_snr(t)) * 2.0 / (t * (1.0 - t));
}

double cdf_lambda(const SnrSampler& sampler, double lambda) {
    check_params(sampler);
    if (sampler.gaussian_in_lambda())
        return normal_cdf(lambda, sampler.lambda_mean(), sampler.lambda_sd());
    // UniformTime: lambda <= x iff t >= t(x); t is uniform on (0, 1).
    const double unshifted = lambda + 2.0 * std::log(sampler.shift);
    return 1.0 - time_of_log_snr(unshifted);
}

DensityTable lambda_density_table(const SnrSampler& sampler, int grid,
                                  double lambda_lo, double lambda_hi) {
    if (grid < 2) throw std::invalid_argument("lambda_density_table: grid must be >= 2");
    if (!(lambda_lo < lambda_hi))
        throw std::invalid_argument("lambda_density_table: bounds must be ordered");
    DensityTable table;
    table.cell_width = (lambda_hi - lambda_lo) / grid;
    table.x.reserve(grid);
    table.p.reserve(grid);
    for (int i = 0; i < grid; ++i) {
        const double x = lambda_lo + (i + 0.5) * table.cell_width;
        table.x.push_back(x);
        table.p.push_back(density_lambda(sampler, x));
    }
    return table;
}

DensityTable time_density_table(const SnrSampler& sampler, int grid) {
    if (grid < 2) throw std::invalid_argument("time_density_table: grid must be >= 2");
    DensityTable table;
    table.cell_width = 1.0 / grid;
    table.x.reserve(grid);
    table.p.reserve(grid);
    for (int i = 0; i < grid; ++i) {
        const double t = (i + 0.5) * table.cell_width;
        table.x.push_back(t);
        table.p.push_back(density_time(sampler, t));
    }
    return table;
}

}  // namespace snrflow
