#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "snrflow/styledata.hpp"

using namespace snrflow;

namespace {
const ImageShape kShape{3, 16, 16};
}

TEST_CASE("degenerate shape renders pure background") {
    ContentSpec content{0, Shape::Circle, 0.0, 0.0, 0.0};
    StyleSpec style = default_styles()[0];
    style.gradient_amplitude = 0.0;
    const VectorXd img = render_canonical(content, style, kShape);
    for (int c = 0; c < 3; ++c)
        for (int px = 0; px < kShape.pixels(); ++px)
            CHECK(img[c * kShape.pixels() + px] == style.background[c]);
}

TEST_CASE("rendering is deterministic given the rng state") {
    const ContentSpec content = default_contents()[2];
    const StyleSpec style = default_styles()[1];
    RandomSource a(77), b(77);
    CHECK(render(content, style, kShape, a) == render(content, style, kShape, b));
}

TEST_CASE("mean pixel value follows closed-form area accounting") {
    // A square stroke with thickness == radius fills the whole square; radius
    // 4 with a centred 16x16 canvas covers exactly 8x8 = 64 pixel centres.
    ContentSpec content{1, Shape::Square, 4.0, 0.0, 0.0};
    StyleSpec style;
    style.background = {0.25, -0.5, 0.75};
    style.palette = {-0.75, 0.5, -0.25};
    style.gradient_amplitude = 0.0;
    style.stroke_thickness = 4.0;
    const VectorXd img = render_canonical(content, style, kShape);
    for (int c = 0; c < 3; ++c) {
        const double mean = img.segment(c * kShape.pixels(), kShape.pixels()).mean();
        const double expected = (192.0 * style.background[c] + 64.0 * style.palette[c]) / 256.0;
        CHECK(mean == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("illumination gradient has zero mean over the canvas") {
    ContentSpec content{0, Shape::Circle, 0.0, 0.0, 0.0};  // background only
    StyleSpec style;
    style.background = {0.1, 0.1, 0.1};
    style.gradient_dir = {0.6, -0.8};
    style.gradient_amplitude = 0.3;
    const VectorXd img = render_canonical(content, style, kShape);
    for (int c = 0; c < 3; ++c)
        CHECK(img.segment(c * kShape.pixels(), kShape.pixels()).mean() ==
              doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("corpus counting, reproducibility and label balance") {
    const auto contents = default_contents();
    const auto all_styles = default_styles();
    const std::vector<StyleSpec> styles(all_styles.begin(), all_styles.begin() + 3);
    const auto corpus = gen_corpus(contents, styles, kShape, 8, 123);
    CHECK(corpus.items.size() == 4 * 3 * 8);

    const auto again = gen_corpus(contents, styles, kShape, 8, 123);
    for (std::size_t i = 0; i < corpus.items.size(); ++i)
        CHECK(corpus.items[i].x0 == again.items[i].x0);

    std::map<std::pair<int, int>, int> hist;
    for (const auto& dp : corpus.items) ++hist[{dp.content_id, dp.style_id}];
    for (const auto& [key, count] : hist) CHECK(count == 8);
    CHECK(hist.size() == 12);

    CHECK_THROWS_AS(gen_corpus(contents, styles, kShape, 0, 1), std::invalid_argument);
}

TEST_CASE("style score: self similarity, contrast, separation") {
    const auto styles = default_styles();
    const auto contents = default_contents();

    // Canonical renders of the reference style score (nearly) perfectly.
    for (const auto& style : styles) {
        std::vector<VectorXd> self;
        for (const auto& c : contents) self.push_back(render_canonical(c, style, kShape));
        CHECK(style_score(self, style, kShape) >= 0.99);
    }

    // A maximally different style (opposite background, different palette and
    // gradient) scores below one half.
    StyleSpec ref = styles[0];
    StyleSpec opposite = ref;
    opposite.background = -ref.background;
    opposite.palette = {0.1, -0.9, 0.6};
    opposite.gradient_dir = {0.0, 1.0};
    opposite.gradient_amplitude = 0.3;
    std::vector<VectorXd> opp;
    for (const auto& c : contents) opp.push_back(render_canonical(c, opposite, kShape));
    CHECK(style_score(opp, ref, kShape) < 0.5);

    // Fixing the style, the score barely depends on the drawn shape.
    for (const auto& style : styles) {
        std::vector<double> scores;
        for (const auto& c : contents) {
            std::vector<VectorXd> one{render_canonical(c, style, kShape)};
            scores.push_back(style_score(one, style, kShape));
        }
        double mean = 0.0;
        for (double s : scores) mean += s;
        mean /= scores.size();
        for (double s : scores) CHECK(std::abs(s - mean) <= 0.05);
    }

    // Jittered renders of the matching style beat every other shipped style.
    const auto corpus = gen_corpus(contents, styles, kShape, 8, 321);
    for (const auto& ref_style : styles) {
        std::vector<std::vector<VectorXd>> by_style(styles.size());
        for (const auto& dp : corpus.items)
            by_style[static_cast<std::size_t>(dp.style_id)].push_back(dp.x0);
        const double own = style_score(by_style[static_cast<std::size_t>(ref_style.style_id)],
                                       ref_style, kShape);
        for (const auto& other : styles) {
            if (other.style_id == ref_style.style_id) continue;
            CHECK(own > style_score(by_style[static_cast<std::size_t>(other.style_id)],
                                    ref_style, kShape));
        }
    }

    CHECK_THROWS_AS(style_score({}, styles[0], kShape), std::invalid_argument);
}

TEST_CASE("content score: template matching across styles") {
    const auto contents = default_contents();
    const auto styles = default_styles();

    // Clean (jittered) renders classify correctly regardless of style.
    RandomSource rng(88);
    for (const auto& expected : contents) {
        std::vector<VectorXd> samples;
        for (const auto& style : styles)
            for (int k = 0; k < 8; ++k)
                samples.push_back(render(expected, style, kShape, rng));
        CHECK(content_score(samples, expected, kShape) >= 0.95);
    }

    // Renders of a different shape almost never classify as the expected one.
    std::vector<VectorXd> circles;
    for (const auto& style : styles)
        for (int k = 0; k < 8; ++k)
            circles.push_back(render(contents[0], style, kShape, rng));
    CHECK(content_score(circles, contents[1], kShape) <= 0.2);

    // A single sample yields a 0/1 fraction.
    std::vector<VectorXd> one{render(contents[3], styles[0], kShape, rng)};
    const double s = content_score(one, contents[3], kShape);
    CHECK((s == 0.0 || s == 1.0));

    CHECK_THROWS_AS(content_score({}, contents[0], kShape), std::invalid_argument);
}

TEST_CASE("scores are deterministic and bounded") {
    const auto contents = default_contents();
    const auto styles = default_styles();
    RandomSource rng(99);
    std::vector<VectorXd> samples;
    for (int k = 0; k < 6; ++k)
        samples.push_back(render(contents[k % 4], styles[k % 4], kShape, rng));
    const double s1 = style_score(samples, styles[2], kShape);
    const double s2 = style_score(samples, styles[2], kShape);
    CHECK(s1 == s2);
    CHECK(s1 >= 0.0);
    CHECK(s1 <= 1.0);
    const double c1 = content_score(samples, contents[1], kShape);
    CHECK(c1 >= 0.0);
    CHECK(c1 <= 1.0);
}
