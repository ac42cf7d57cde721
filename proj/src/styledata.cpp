#include "snrflow/styledata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace snrflow {

std::string shape_name(Shape s) {
    switch (s) {
        case Shape::Circle: return "circle";
        case Shape::Square: return "square";
        case Shape::Triangle: return "triangle";
        case Shape::Cross: return "cross";
    }
    return "unknown";
}

Shape shape_from_name(const std::string& name) {
    if (name == "circle") return Shape::Circle;
    if (name == "square") return Shape::Square;
    if (name == "triangle") return Shape::Triangle;
    if (name == "cross") return Shape::Cross;
    throw std::invalid_argument("unknown shape name: " + name);
}

std::vector<ContentSpec> default_contents() {
    return {
        {0, Shape::Circle, 4.5, 1.0, 0.4},
        {1, Shape::Square, 5.0, 1.0, 0.4},
        {2, Shape::Triangle, 5.6, 1.0, 0.4},
        {3, Shape::Cross, 5.2, 1.0, 0.4},
    };
}

std::vector<StyleSpec> default_styles() {
    return {
        {0, {0.85, 0.82, 0.72}, {-0.85, -0.85, -0.80}, {1.0, 0.0}, 0.10, 1.5},
        {1, {-0.85, -0.80, -0.60}, {0.20, 0.90, 0.95}, {0.0, 1.0}, 0.20, 2.0},
        {2, {-0.70, 0.65, 0.70}, {0.90, -0.30, -0.60}, {M_SQRT1_2, M_SQRT1_2}, 0.15, 1.0},
        {3, {0.80, -0.75, -0.60}, {-0.70, 0.85, 0.90}, {-M_SQRT1_2, M_SQRT1_2}, 0.10, 2.5},
    };
}

namespace {

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double abx = bx - ax, aby = by - ay;
    const double apx = px - ax, apy = py - ay;
    const double len2 = abx * abx + aby * aby;
    double u = len2 > 0.0 ? (apx * abx + apy * aby) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const double dx = apx - u * abx, dy = apy - u * aby;
    return std::hypot(dx, dy);
}

bool in_stroke(Shape shape, double dx, double dy, double radius, double thickness) {
    if (radius <= 0.0) return false;
    const double half = thickness / 2.0;
    switch (shape) {
        case Shape::Circle:
            return std::abs(std::hypot(dx, dy) - radius) <= half;
        case Shape::Square: {
            const double m = std::max(std::abs(dx), std::abs(dy));
            return m <= radius && m >= radius - thickness;
        }
        case Shape::Triangle: {
            double vx[3], vy[3];
            for (int k = 0; k < 3; ++k) {
                const double a = 2.0 * M_PI * k / 3.0;
                vx[k] = radius * std::sin(a);
                vy[k] = -radius * std::cos(a);
            }
            double d = std::numeric_limits<double>::max();
            for (int k = 0; k < 3; ++k) {
                const int j = (k + 1) % 3;
                d = std::min(d, point_segment_distance(dx, dy, vx[k], vy[k], vx[j], vy[j]));
            }
            return d <= half;
        }
        case Shape::Cross:
            return (std::abs(dx) <= half && std::abs(dy) <= radius) ||
                   (std::abs(dy) <= half && std::abs(dx) <= radius);
    }
    return false;
}

VectorXd render_at(const ContentSpec& content, const StyleSpec& style, const ImageShape& shape,
                   double cx, double cy, double radius) {
    if (style.stroke_thickness < 1.0)
        throw std::invalid_argument("render: stroke thickness must be >= 1");
    if (style.gradient_amplitude < 0.0 || style.gradient_amplitude > 0.5)
        throw std::invalid_argument("render: gradient amplitude must lie in [0, 0.5]");

    Eigen::Vector2d dir = style.gradient_dir;
    const double norm = dir.norm();
    if (norm > 0.0) dir /= norm;

    const double gx0 = shape.width / 2.0, gy0 = shape.height / 2.0;
    const double gscale = std::max(shape.width, shape.height) / 2.0;

    VectorXd img(shape.size());
    for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const bool stroke =
                in_stroke(content.shape, px - cx, py - cy, radius, style.stroke_thickness);
            const double grad = style.gradient_amplitude *
                                ((px - gx0) * dir.x() + (py - gy0) * dir.y()) / gscale;
            for (int c = 0; c < shape.channels; ++c) {
                const double base = stroke ? style.palette[c] : style.background[c];
                img[static_cast<Eigen::Index>(c) * shape.pixels() + y * shape.width + x] =
                    std::clamp(base + grad, -1.0, 1.0);
            }
        }
    }
    return img;
}

}  // namespace

VectorXd render(const ContentSpec& content, const StyleSpec& style, const ImageShape& shape,
                RandomSource& rng) {
    const double cx = shape.width / 2.0 + content.center_jitter * (2.0 * rng.uniform() - 1.0);
    const double cy = shape.height / 2.0 + content.center_jitter * (2.0 * rng.uniform() - 1.0);
    const double radius = content.base_radius + content.size_jitter * (2.0 * rng.uniform() - 1.0);
    return render_at(content, style, shape, cx, cy, radius);
}

VectorXd render_canonical(const ContentSpec& content, const StyleSpec& style,
                          const ImageShape& shape) {
    return render_at(content, style, shape, shape.width / 2.0, shape.height / 2.0,
                     content.base_radius);
}

StyleCorpus gen_corpus(std::span<const ContentSpec> contents, std::span<const StyleSpec> styles,
                       const ImageShape& shape, int per_pair, std::uint64_t seed) {
    if (contents.empty() || styles.empty() || per_pair < 1)
        throw std::invalid_argument("gen_corpus: need contents, styles and per_pair >= 1");
    StyleCorpus corpus;
    corpus.image = shape;
    corpus.n_content = static_cast<int>(contents.size());
    corpus.n_style = static_cast<int>(styles.size());
    corpus.seed = seed;
    RandomSource base(seed);
    for (std::size_t ci = 0; ci < contents.size(); ++ci) {
        for (std::size_t si = 0; si < styles.size(); ++si) {
            for (int k = 0; k < per_pair; ++k) {
                RandomSource rng = base.stream((static_cast<std::uint64_t>(ci) << 40) |
                                               (static_cast<std::uint64_t>(si) << 20) |
                                               static_cast<std::uint64_t>(k));
                corpus.items.push_back({render(contents[ci], styles[si], shape, rng),
                                        contents[ci].content_id, styles[si].style_id});
            }
        }
    }
    return corpus;
}

namespace {

Eigen::MatrixXd to_gray(const VectorXd& img, const ImageShape& shape) {
    Eigen::MatrixXd gray = Eigen::MatrixXd::Zero(shape.height, shape.width);
    for (int c = 0; c < shape.channels; ++c)
        for (int y = 0; y < shape.height; ++y)
            for (int x = 0; x < shape.width; ++x)
                gray(y, x) +=
                    img[static_cast<Eigen::Index>(c) * shape.pixels() + y * shape.width + x];
    gray /= shape.channels;
    return gray;
}

Eigen::Vector3d mean_color(const VectorXd& img, const ImageShape& shape) {
    Eigen::Vector3d m = Eigen::Vector3d::Zero();
    for (int c = 0; c < std::min(3, shape.channels); ++c)
        m[c] = img.segment(static_cast<Eigen::Index>(c) * shape.pixels(), shape.pixels()).mean();
    return m;
}

/// Magnitudes of the k lowest-frequency 2-D DFT coefficients of the gray
/// image, normalized by the pixel count. Frequencies are ranked by wrapped
/// radius, ties broken by index.
VectorXd low_freq_magnitudes(const Eigen::MatrixXd& gray, int k) {
    const int h = static_cast<int>(gray.rows());
    const int w = static_cast<int>(gray.cols());
    struct Freq { int r2, u, v; };
    std::vector<Freq> order;
    order.reserve(static_cast<std::size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            const int fu = std::min(u, h - u), fv = std::min(v, w - v);
            order.push_back({fu * fu + fv * fv, u, v});
        }
    std::sort(order.begin(), order.end(), [](const Freq& a, const Freq& b) {
        return std::tie(a.r2, a.u, a.v) < std::tie(b.r2, b.u, b.v);
    });
    k = std::min<int>(k, static_cast<int>(order.size()));
    VectorXd mags(k);
    for (int i = 0; i < k; ++i) {
        const int u = order[static_cast<std::size_t>(i)].u;
        const int v = order[static_cast<std::size_t>(i)].v;
        double re = 0.0, im = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double phase = -2.0 * M_PI * (static_cast<double>(u) * y / h +
                                                    static_cast<double>(v) * x / w);
                re += gray(y, x) * std::cos(phase);
                im += gray(y, x) * std::sin(phase);
            }
        mags[i] = std::hypot(re, im) / (h * w);
    }
    return mags;
}

struct StyleFeatures {
    Eigen::Vector3d color;
    VectorXd low_freq;
};

StyleFeatures style_features(const VectorXd& img, const ImageShape& shape, int k) {
    return {mean_color(img, shape), low_freq_magnitudes(to_gray(img, shape), k)};
}

}  // namespace

double style_score(std::span<const VectorXd> samples, const StyleSpec& reference,
                   const ImageShape& shape, int k_low_freq) {
    if (samples.empty()) throw std::invalid_argument("style_score: empty sample set");

    // Reference exemplars: one canonical render per default content. Each
    // sample is scored against its nearest exemplar, so an exact render of
    // any shape in the reference style scores 1.
    const auto contents = default_contents();
    std::vector<StyleFeatures> refs;
    refs.reserve(contents.size());
    for (const auto& content : contents)
        refs.push_back(
            style_features(render_canonical(content, reference, shape), shape, k_low_freq));

    const double freq_norm = 0.5 * std::sqrt(static_cast<double>(k_low_freq));
    double total = 0.0;
    for (const auto& img : samples) {
        const StyleFeatures f = style_features(img, shape, k_low_freq);
        double best = std::numeric_limits<double>::max();
        for (const auto& ref : refs) {
            const double color_d = std::min(1.0, (f.color - ref.color).norm() / std::sqrt(3.0));
            const double freq_d = std::min(1.0, (f.low_freq - ref.low_freq).norm() / freq_norm);
            best = std::min(best, 0.5 * color_d + 0.5 * freq_d);
        }
        total += std::clamp(1.0 - best, 0.0, 1.0);
    }
    return total / static_cast<double>(samples.size());
}

namespace {

Eigen::MatrixXd whiten(const Eigen::MatrixXd& gray) {
    const double mean = gray.mean();
    Eigen::MatrixXd c = gray.array() - mean;
    const double sd = std::sqrt(c.array().square().mean());
    if (sd < 1e-9) return Eigen::MatrixXd::Zero(gray.rows(), gray.cols());
    return c / sd;
}

/// Correlation coefficient maximized over small cyclic shifts of the sample.
double shifted_abs_correlation(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& tmpl,
                               int max_shift) {
    const int h = static_cast<int>(sample.rows());
    const int w = static_cast<int>(sample.cols());
    double best = 0.0;
    for (int sy = -max_shift; sy <= max_shift; ++sy)
        for (int sx = -max_shift; sx <= max_shift; ++sx) {
            double acc = 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const int yy = ((y + sy) % h + h) % h;
                    const int xx = ((x + sx) % w + w) % w;
                    acc += sample(yy, xx) * tmpl(y, x);
                }
            best = std::max(best, std::abs(acc) / (h * w));
        }
    return best;
}

Eigen::MatrixXd shape_template(const ContentSpec& content, const ImageShape& shape,
                               double thickness) {
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(shape.height, shape.width);
    const double cx = shape.width / 2.0, cy = shape.height / 2.0;
    for (int y = 0; y < shape.height; ++y)
        for (int x = 0; x < shape.width; ++x)
            if (in_stroke(content.shape, x + 0.5 - cx, y + 0.5 - cy, content.base_radius,
                          thickness))
                mask(y, x) = 1.0;
    return whiten(mask);
}

}  // namespace

double content_score(std::span<const VectorXd> samples, const ContentSpec& expected,
                     const ImageShape& shape) {
    if (samples.empty()) throw std::invalid_argument("content_score: empty sample set");
    const auto contents = default_contents();

    // Matched-filter bank: each shape contributes one template per stroke
    // thickness in the shipped range.
    const std::vector<double> thicknesses = {1.0, 1.75, 2.5};
    std::vector<std::vector<Eigen::MatrixXd>> banks(contents.size());
    int expected_idx = -1;
    for (std::size_t i = 0; i < contents.size(); ++i) {
        for (double th : thicknesses)
            banks[i].push_back(shape_template(contents[i], shape, th));
        if (contents[i].shape == expected.shape) expected_idx = static_cast<int>(i);
    }
    if (expected_idx < 0) throw std::invalid_argument("content_score: shape not in template set");

    int hits = 0;
    for (const auto& img : samples) {
        const Eigen::MatrixXd sample = whiten(to_gray(img, shape));
        int best = 0;
        double best_corr = -1.0;
        for (std::size_t i = 0; i < banks.size(); ++i) {
            double corr = 0.0;
            for (const auto& tmpl : banks[i])
                corr = std::max(corr, shifted_abs_correlation(sample, tmpl, 2));
            if (corr > best_corr) {
                best_corr = corr;
                best = static_cast<int>(i);
            }
        }
        if (best == expected_idx) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace snrflow
