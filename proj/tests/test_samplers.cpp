#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snrflow/sampler.hpp"
#include "snrflow/stats.hpp"
#include "test_support.hpp"

using namespace snrflow;

namespace {
constexpr int kBig = 1000000;

std::vector<double> lambda_draws(const SnrSampler& s, std::uint64_t seed, int n) {
    RandomSource rng(seed);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (const SnrDraw& d : sample(s, rng, n)) out.push_back(d.log_snr);
    return out;
}
}  // namespace

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(SnrSampler::style_friendly(-6.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(SnrSampler::logit_normal(0.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(SnrSampler::uniform_time(0.0), std::invalid_argument);
    RandomSource rng(1);
    CHECK_THROWS_AS(sample(SnrSampler::uniform_time(), rng, 0), std::invalid_argument);
}

TEST_CASE("style-friendly moments match declared parameters") {
    const auto ls = lambda_draws(SnrSampler::style_friendly(-6.0, 2.0), 11, kBig);
    double mean = 0.0;
    for (double l : ls) mean += l;
    mean /= ls.size();
    double var = 0.0;
    for (double l : ls) var += (l - mean) * (l - mean);
    var /= (ls.size() - 1.0);
    CHECK(std::abs(mean - (-6.0)) < 0.01);
    CHECK(std::abs(std::sqrt(var) - 2.0) < 0.01);
}

TEST_CASE("style-friendly concentrates t between 0.8 and 1.0") {
    RandomSource rng(12);
    const auto draws = sample(SnrSampler::style_friendly(-6.0, 2.0), rng, kBig);
    int hit = 0;
    for (const auto& d : draws)
        if (d.t >= 0.8 && d.t <= 1.0) ++hit;
    const double frac = static_cast<double>(hit) / kBig;
    // Gaussian-CDF oracle: t >= 0.8 iff lambda <= -2 log 4.
    const double expected = normal_cdf(-2.0 * std::log(4.0), -6.0, 2.0);
    CHECK(std::abs(frac - 0.947) < 0.002);
    CHECK(std::abs(frac - expected) < 0.002);
}

TEST_CASE("logit-normal moments and t mass") {
    const auto s = SnrSampler::logit_normal(0.0, 1.0);
    RandomSource rng(13);
    const auto draws = sample(s, rng, kBig);
    double mean = 0.0;
    for (const auto& d : draws) mean += d.log_snr;
    mean /= draws.size();
    double var = 0.0;
    for (const auto& d : draws) var += (d.log_snr - mean) * (d.log_snr - mean);
    var /= (draws.size() - 1.0);
    int hit = 0;
    for (const auto& d : draws)
        if (d.t >= 0.8 && d.t <= 1.0) ++hit;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(std::sqrt(var) - 2.0) < 0.01);
    CHECK(std::abs(static_cast<double>(hit) / kBig - 0.083) < 0.002);
}

TEST_CASE("lambda/t pairs are consistent with the schedule map") {
    for (const auto& s : {SnrSampler::style_friendly(-6.0, 2.0), SnrSampler::uniform_time(),
                          SnrSampler::logit_normal(0.3, 0.7, 2.0),
                          SnrSampler::edm_log_normal(-1.2, 1.2)}) {
        RandomSource rng(14);
        for (const auto& d : sample(s, rng, 1000))
            CHECK(d.t == doctest::Approx(time_of_log_snr(d.log_snr)).epsilon(1e-15));
    }
}

TEST_CASE("density examples") {
    CHECK(density_lambda(SnrSampler::uniform_time(), 0.0) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(density_lambda(SnrSampler::style_friendly(-6.0, 2.0), -6.0) ==
          doctest::Approx(1.0 / (2.0 * std::sqrt(2.0 * M_PI))).epsilon(1e-14));
    CHECK(density_time(SnrSampler::uniform_time(), 0.3) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(density_time(SnrSampler::style_friendly(-6.0, 2.0), 0.95) >
          density_time(SnrSampler::style_friendly(-6.0, 2.0), 0.5));
    CHECK_THROWS_AS(density_time(SnrSampler::uniform_time(), 0.0), std::domain_error);
    CHECK_THROWS_AS(density_time(SnrSampler::uniform_time(), 1.0), std::domain_error);
}

TEST_CASE("densities integrate to one (quadrature oracle)") {
    const std::vector<SnrSampler> samplers = {
        SnrSampler::style_friendly(-6.0, 2.0), SnrSampler::logit_normal(0.0, 1.0),
        SnrSampler::logit_normal(0.0, 1.0, 3.0), SnrSampler::edm_log_normal(-1.2, 1.2),
        SnrSampler::uniform_time()};
    for (const auto& s : samplers) {
        const double li = testsupport::integrate_midpoint(
            [&s](double l) { return density_lambda(s, l); }, -40.0, 40.0, 40000);
        CHECK(std::abs(li - 1.0) < 1e-6);
        const double ti = testsupport::integrate_midpoint(
            [&s](double t) { return density_time(s, t); }, 1e-9, 1.0 - 1e-9, 200000);
        CHECK(std::abs(ti - 1.0) < 1e-6);
    }
}

TEST_CASE("change of variables between lambda and t densities") {
    RandomSource rng(15);
    const auto s = SnrSampler::style_friendly(-6.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = rng.uniform_open();
        const double via_lambda = density_lambda(s, log_snr(t)) * 2.0 / (t * (1.0 - t));
        CHECK(density_time(s, t) == doctest::Approx(via_lambda).epsilon(1e-12));
    }
}

TEST_CASE("KS statistic vs closed-form CDF below 0.005 for every variant") {
    const std::vector<SnrSampler> samplers = {
        SnrSampler::style_friendly(-6.0, 2.0), SnrSampler::logit_normal(0.0, 1.0),
        SnrSampler::edm_log_normal(-1.2, 1.2), SnrSampler::uniform_time()};
    std::uint64_t seed = 20;
    for (const auto& s : samplers) {
        auto ls = lambda_draws(s, seed++, kBig);
        const double d = ks_statistic(std::move(ls), [&s](double x) { return cdf_lambda(s, x); });
        CHECK(d < 0.005);
    }
}

TEST_CASE("sampling with shift equals sampling then shifting (KS)") {
    const auto shifted = SnrSampler::style_friendly(-2.0, 1.5, 3.0);
    auto ls = lambda_draws(shifted, 31, kBig);
    // Independent draws from the unshifted sampler, shifted afterwards.
    const auto unshifted = SnrSampler::style_friendly(-2.0, 1.5);
    RandomSource rng(32);
    std::vector<double> manual;
    manual.reserve(kBig);
    for (const auto& d : sample(unshifted, rng, kBig))
        manual.push_back(shift_log_snr(d.log_snr, 3.0));
    // Both must match the shifted closed form.
    const double d1 = ks_statistic(std::move(ls),
                                   [&shifted](double x) { return cdf_lambda(shifted, x); });
    const double d2 = ks_statistic(std::move(manual),
                                   [&shifted](double x) { return cdf_lambda(shifted, x); });
    CHECK(d1 < 0.005);
    CHECK(d2 < 0.005);
}

TEST_CASE("logit-normal(m, s) coincides with the lambda-space normal(-2m, 2s)") {
    const auto ln = SnrSampler::logit_normal(0.4, 0.8);
    const auto sf = SnrSampler::style_friendly(-0.8, 1.6);
    auto ls = lambda_draws(ln, 33, kBig);
    const double d = ks_statistic(std::move(ls), [&sf](double x) { return cdf_lambda(sf, x); });
    CHECK(d < 0.005);
}

TEST_CASE("density tables") {
    const auto uniform = SnrSampler::uniform_time();
    const auto tiny = lambda_density_table(uniform, 2);
    CHECK(tiny.x.size() == 2);
    CHECK(tiny.p.size() == 2);

    const auto tt = time_density_table(uniform, 64);
    for (double p : tt.p) CHECK(p == doctest::Approx(1.0).epsilon(1e-12));

    const auto sf = SnrSampler::style_friendly(-6.0, 2.0);
    const auto lt = lambda_density_table(sf, 512);
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < lt.p.size(); ++i)
        if (lt.p[i] > lt.p[argmax]) argmax = i;
    CHECK(std::abs(lt.x[argmax] - (-6.0)) <= lt.cell_width);

    CHECK_THROWS_AS(lambda_density_table(uniform, 1), std::invalid_argument);
}

TEST_CASE("chi-squared fit of Monte Carlo histogram against closed form") {
    // Equal-mass bins from closed-form quantiles keep every expected count
    // identical, which is the cleanest chi-squared setting.
    const std::vector<SnrSampler> samplers = {
        SnrSampler::style_friendly(-6.0, 2.0), SnrSampler::logit_normal(0.0, 1.0),
        SnrSampler::edm_log_normal(-1.2, 1.2), SnrSampler::uniform_time()};
    const int bins = 101;  // dof = 100, even
    std::uint64_t seed = 41;
    for (const auto& s : samplers) {
        auto cdf = [&s](double x) { return cdf_lambda(s, x); };
        std::vector<double> edges(static_cast<std::size_t>(bins) - 1);
        for (int b = 1; b < bins; ++b)
            edges[static_cast<std::size_t>(b - 1)] = testsupport::quantile_bisect(
                cdf, static_cast<double>(b) / bins, -200.0, 200.0);
        std::vector<long> counts(static_cast<std::size_t>(bins), 0);
        for (double l : lambda_draws(s, seed++, kBig)) {
            const auto it = std::upper_bound(edges.begin(), edges.end(), l);
            ++counts[static_cast<std::size_t>(it - edges.begin())];
        }
        const double expected = static_cast<double>(kBig) / bins;
        double chi2 = 0.0;
        for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
        const double p = testsupport::chi2_sf_even_dof(chi2, bins - 1);
        CHECK(p > 0.01);
    }
}
