#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace snrflow {

inline double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
/// Sorts a copy of the samples.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n = 0;
};

McEstimate mc_estimate(const std::vector<double>& values);

}  // namespace snrflow
