#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snrflow/diffusion.hpp"
#include "test_support.hpp"

using namespace snrflow;

namespace {

Architecture tiny_arch() {
    Architecture a;
    a.image = ImageShape{1, 4, 4};
    a.hidden_widths = {8, 6};
    a.time_embed_dim = 4;
    a.n_content = 2;
    a.n_style = 2;
    a.cond_embed_dim = 3;
    return a;
}

std::vector<BatchItem<double>> random_batch(const Architecture& arch, RandomSource& rng, int n) {
    std::vector<BatchItem<double>> items;
    const auto sampler = SnrSampler::logit_normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const VectorXd x0 = rng.gaussian_vector(arch.input_dim());
        const VectorXd eps = sample_noise(rng, arch.image);
        items.push_back(make_batch_item<double>(x0, Condition{i % 2, (i + 1) % 2},
                                                sample_one(sampler, rng), eps));
    }
    return items;
}

}  // namespace

TEST_CASE("forward diffusion interpolates between data and noise") {
    VectorXd x0(2), eps(2);
    x0 << 1.0, 0.0;
    eps << 0.0, 1.0;
    CHECK(forward_diffuse(x0, eps, 0.0) == x0);
    CHECK(forward_diffuse(x0, eps, 1.0) == eps);
    const VectorXd mid = forward_diffuse(x0, eps, 0.25);
    CHECK(mid[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(mid[1] == doctest::Approx(0.25).epsilon(1e-15));

    VectorXd bad(3);
    CHECK_THROWS_AS(forward_diffuse(x0, bad, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(forward_diffuse(x0, eps, 1.5), std::domain_error);
}

TEST_CASE("expected distance to data grows with t") {
    RandomSource rng(21);
    const ImageShape shape{1, 8, 8};
    const std::vector<double> ts = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> means(ts.size(), 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const VectorXd x0 = rng.gaussian_vector(shape.size());
        const VectorXd eps = sample_noise(rng, shape);
        for (std::size_t k = 0; k < ts.size(); ++k)
            means[k] += (forward_diffuse(x0, eps, ts[k]) - x0).norm() / n;
    }
    for (std::size_t k = 1; k < ts.size(); ++k) CHECK(means[k] > means[k - 1]);
}

TEST_CASE("velocity target") {
    VectorXd x0(2), eps(2);
    x0 << 1.0, 0.0;
    eps << 0.0, 1.0;
    CHECK(velocity_target(x0, x0).isZero(0.0));
    const VectorXd v = velocity_target(x0, eps);
    CHECK(v[0] == -1.0);
    CHECK(v[1] == 1.0);
    CHECK(velocity_target((3.0 * x0).eval(), (3.0 * eps).eval()) == 3.0 * v);
    VectorXd bad(3);
    CHECK_THROWS_AS(velocity_target(x0, bad), std::invalid_argument);
}

TEST_CASE("offset noise statistics and determinism") {
    const ImageShape shape{3, 16, 16};

    RandomSource a(33), b(33);
    CHECK(sample_noise(a, shape, {0.1}) == sample_noise(b, shape, {0.1}));

    // scale = 0 consumes the identical generator stream as the plain path
    RandomSource c(33), d(33);
    CHECK(sample_noise(c, shape, {0.0}) == sample_noise(d, shape));
    CHECK(c.raw() == d.raw());

    CHECK_THROWS_AS(sample_noise(a, shape, {-0.1}), std::invalid_argument);

    // Variance-addition oracle: per-channel spatial mean has
    // std = sqrt(1/(H*W) + scale^2).
    auto channel_mean_std = [&shape](double scale, std::uint64_t seed) {
        RandomSource rng(seed);
        std::vector<double> means;
        const int trials = 34000;  // ~1e5 channel means
        for (int i = 0; i < trials; ++i) {
            const VectorXd n = sample_noise(rng, shape, {scale});
            for (int ch = 0; ch < 3; ++ch)
                means.push_back(n.segment(ch * shape.pixels(), shape.pixels()).mean());
        }
        double m = 0.0;
        for (double v : means) m += v;
        m /= means.size();
        double var = 0.0;
        for (double v : means) var += (v - m) * (v - m);
        return std::sqrt(var / (means.size() - 1.0));
    };
    CHECK(std::abs(channel_mean_std(0.1, 34) - std::sqrt(1.0 / 256.0 + 0.01)) < 0.003);
    CHECK(std::abs(channel_mean_std(0.0, 35) - std::sqrt(1.0 / 256.0)) < 0.002);
}

TEST_CASE("dm loss values") {
    const Architecture arch = tiny_arch();
    RandomSource rng(40);
    auto batch = random_batch(arch, rng, 1);

    // Zero network predicts zero velocity: loss equals the mean square of the
    // target.
    auto zeroed = zeros_like(init<double>(arch, rng));
    const double m = batch[0].target_v.squaredNorm() / batch[0].target_v.size();
    CHECK(dm_loss<double>(zeroed, batch) == doctest::Approx(m).epsilon(1e-12));

    // A network whose output equals the target exactly has zero loss.
    auto perfect = zeroed;
    perfect.out.bias = batch[0].target_v;
    CHECK(dm_loss<double>(perfect, batch) == 0.0);

    CHECK_THROWS_AS(dm_loss<double>(zeroed, std::span<const BatchItem<double>>{}),
                    std::invalid_argument);
}

TEST_CASE("dm loss gradients match central differences") {
    const Architecture arch = tiny_arch();
    RandomSource rng(41);
    auto params = init<double>(arch, rng);
    const auto batch = random_batch(arch, rng, 3);

    DenoiserGrads<double> grads = zeros_like(params);
    dm_loss<double>(params, batch, &grads);

    const double h = 1e-4;
    auto views = collect_tensors(params);
    auto gviews = collect_tensors(const_cast<const DenoiserGrads<double>&>(grads));
    for (std::size_t k = 0; k < views.size(); ++k) {
        double num2 = 0.0, diff2 = 0.0;
        for (Eigen::Index i = 0; i < views[k].size(); ++i) {
            const double orig = views[k].data[i];
            views[k].data[i] = orig + h;
            const double up = dm_loss<double>(params, batch);
            views[k].data[i] = orig - h;
            const double down = dm_loss<double>(params, batch);
            views[k].data[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            num2 += fd * fd;
            diff2 += (fd - gviews[k].data[i]) * (fd - gviews[k].data[i]);
        }
        INFO("block ", views[k].name);
        CHECK(std::sqrt(diff2) / std::max(std::sqrt(num2), 1e-8) < 1e-4);
    }
}

TEST_CASE("dco loss value at equal models and in the saturated limit") {
    const Architecture arch = tiny_arch();
    RandomSource rng(42);
    const auto params = init<double>(arch, rng);
    const auto batch = random_batch(arch, rng, 2);

    CHECK(dco_loss<double>(params, params, batch, {1.0}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // theta perfect, phi far off: z -> -inf, loss -> 0.
    auto zeroed = zeros_like(params);
    auto perfect = zeroed;
    perfect.out.bias = batch[0].target_v;
    const std::vector<BatchItem<double>> one(batch.begin(), batch.begin() + 1);
    CHECK(dco_loss<double>(perfect, zeroed, one, {200.0}) < 1e-6);

    CHECK_THROWS_AS(dco_loss<double>(params, params, batch, {0.0}), std::invalid_argument);
}

TEST_CASE("dco gradients match central differences and ignore phi") {
    const Architecture arch = tiny_arch();
    RandomSource rng(43);
    auto theta = init<double>(arch, rng);
    const auto phi = init<double>(arch, rng);  // different draw
    const auto batch = random_batch(arch, rng, 2);
    const DcoConfig cfg{1.0};

    DenoiserGrads<double> grads = zeros_like(theta);
    dco_loss<double>(theta, phi, batch, cfg, &grads);

    const double h = 1e-4;
    auto views = collect_tensors(theta);
    auto gviews = collect_tensors(const_cast<const DenoiserGrads<double>&>(grads));
    for (std::size_t k = 0; k < views.size(); ++k) {
        double num2 = 0.0, diff2 = 0.0;
        for (Eigen::Index i = 0; i < views[k].size(); ++i) {
            const double orig = views[k].data[i];
            views[k].data[i] = orig + h;
            const double up = dco_loss<double>(theta, phi, batch, cfg);
            views[k].data[i] = orig - h;
            const double down = dco_loss<double>(theta, phi, batch, cfg);
            views[k].data[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            num2 += fd * fd;
            diff2 += (fd - gviews[k].data[i]) * (fd - gviews[k].data[i]);
        }
        INFO("block ", views[k].name);
        CHECK(std::sqrt(diff2) / std::max(std::sqrt(num2), 1e-8) < 1e-4);
    }
}

TEST_CASE("adapted dco gradient spot check") {
    const Architecture arch = tiny_arch();
    RandomSource rng(44);
    const auto base = init<double>(arch, rng);
    auto adapter = attach(base, {"blocks.0", "out"}, 2, 2.0, rng);
    for (auto& t : adapter.targets)
        for (Eigen::Index i = 0; i < t.B.size(); ++i) t.B.data()[i] = 0.05 * rng.gaussian();
    const auto batch = random_batch(arch, rng, 2);
    const DcoConfig cfg{1.0};

    auto grads = zero_lora_grads(adapter);
    dco_loss_adapted<double>(base, adapter, base, batch, cfg, &grads);

    const double h = 1e-4;
    MatrixXd& b0 = adapter.targets[0].B;
    for (Eigen::Index i : {Eigen::Index(0), b0.size() / 2, b0.size() - 1}) {
        const double orig = b0.data()[i];
        b0.data()[i] = orig + h;
        const double up = dco_loss_adapted<double>(base, adapter, base, batch, cfg);
        b0.data()[i] = orig - h;
        const double down = dco_loss_adapted<double>(base, adapter, base, batch, cfg);
        b0.data()[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        CHECK(fd == doctest::Approx(grads.dB[0].data()[i]).epsilon(1e-4));
    }
}

TEST_CASE("importance weighting recovers the sampler mass for constant error") {
    const auto sampler = SnrSampler::style_friendly(-6.0, 2.0);
    RandomSource rng(50);
    const double c = 2.71;
    const NoiseErrFn constant = [c](double, double, RandomSource&) { return c; };

    // Narrow window: expectation is c times the sampler's mass inside it.
    const McEstimate est =
        importance_weighted_loss_estimate(sampler, constant, rng, 200000, -6.0, -2.0);
    const double mass = testsupport::integrate_midpoint(
        [&sampler](double l) { return density_lambda(sampler, l); }, -6.0, -2.0, 20000);
    CHECK(std::abs(est.mean - c * mass) < 4.0 * est.std_error);

    // Wide window around the whole distribution: estimate approaches c.
    const McEstimate wide =
        importance_weighted_loss_estimate(sampler, constant, rng, 200000, -20.0, 20.0);
    CHECK(std::abs(wide.mean - c) < 4.0 * wide.std_error);
}

TEST_CASE("direct and importance-weighted estimates agree (stub integrand)") {
    const auto sampler = SnrSampler::style_friendly(-6.0, 2.0);
    const NoiseErrFn err = [](double lambda, double, RandomSource&) {
        return 0.3 + std::exp(-(lambda + 5.0) * (lambda + 5.0) / 10.0);
    };
    RandomSource r1(51), r2(52);
    const McEstimate direct = direct_loss_estimate(sampler, err, r1, 100000);
    const McEstimate weighted =
        importance_weighted_loss_estimate(sampler, err, r2, 100000, -20.0, 20.0);
    const double se = std::hypot(direct.std_error, weighted.std_error);
    CHECK(std::abs(direct.mean - weighted.mean) < 3.0 * se);

    const double oracle = testsupport::integrate_midpoint(
        [&](double l) {
            RandomSource dummy(0);
            return density_lambda(sampler, l) * err(l, 0.0, dummy);
        },
        -30.0, 10.0, 40000);
    CHECK(std::abs(direct.mean - oracle) < 4.0 * direct.std_error);
}

TEST_CASE("direct and importance-weighted estimates agree on a frozen net") {
    const Architecture arch = tiny_arch();
    RandomSource rng(53);
    const auto params = init<double>(arch, rng);
    const VectorXd x0 = rng.gaussian_vector(arch.input_dim());
    const auto err = make_velocity_sq_err(params, x0, Condition{0, 1});
    const auto sampler = SnrSampler::style_friendly(-6.0, 2.0);

    RandomSource r1(54), r2(55);
    const McEstimate direct = direct_loss_estimate(sampler, err, r1, 100000);
    const McEstimate weighted =
        importance_weighted_loss_estimate(sampler, err, r2, 100000, -20.0, 20.0);
    CHECK(std::abs(direct.mean - weighted.mean) <
          3.0 * std::hypot(direct.std_error, weighted.std_error));
}

TEST_CASE("estimates are reproducible under a fixed seed") {
    const Architecture arch = tiny_arch();
    RandomSource rng(56);
    const auto params = init<double>(arch, rng);
    const VectorXd x0 = rng.gaussian_vector(arch.input_dim());
    const auto sampler = SnrSampler::style_friendly(-6.0, 2.0);

    RandomSource a(57), b(57);
    const double va = importance_weighted_loss(params, x0, Condition{0, 0}, sampler, a, 1,
                                               -20.0, 20.0);
    const double vb = importance_weighted_loss(params, x0, Condition{0, 0}, sampler, b, 1,
                                               -20.0, 20.0);
    CHECK(va == vb);
}
