#pragma once

#include <span>
#include <string>
#include <vector>

#include "snrflow/rng.hpp"
#include "snrflow/types.hpp"

namespace snrflow {

// Procedural corpus: "content" is the drawn shape, "style" is global
// low-frequency appearance (background, palette, illumination gradient,
// stroke width). Shapes are drawn as strokes so the style dominates image
// statistics, and the proxy metrics read exactly those statistics back.

enum class Shape { Circle, Square, Triangle, Cross };

std::string shape_name(Shape s);
Shape shape_from_name(const std::string& name);

struct StyleSpec {
    int style_id = 0;
    Eigen::Vector3d background{0, 0, 0};      // RGB in [-1, 1]
    Eigen::Vector3d palette{1, 1, 1};         // stroke RGB
    Eigen::Vector2d gradient_dir{1, 0};       // normalized internally
    double gradient_amplitude = 0.0;          // <= 0.5
    double stroke_thickness = 1.0;            // >= 1 pixel
};

struct ContentSpec {
    int content_id = 0;
    Shape shape = Shape::Circle;
    double base_radius = 4.6;    // nominal size in pixels
    double center_jitter = 1.0;  // uniform +- jitter of the centre
    double size_jitter = 0.4;    // uniform +- jitter of the radius
};

struct DataPoint {
    VectorXd x0;  // channel-major image in [-1, 1]
    int content_id = 0;
    int style_id = 0;
};

struct StyleCorpus {
    ImageShape image;
    std::vector<DataPoint> items;
    int n_content = 0;
    int n_style = 0;
    std::uint64_t seed = 0;
};

/// Four shapes with stroke areas balanced so the mean color barely depends on
/// the content.
std::vector<ContentSpec> default_contents();
/// Four styles with well-separated backgrounds; the last one is conventionally
/// held out as the fine-tuning reference.
std::vector<StyleSpec> default_styles();

/// Deterministic given the rng state. Jitter draws: centre x, centre y, size.
VectorXd render(const ContentSpec& content, const StyleSpec& style, const ImageShape& shape,
                RandomSource& rng);

/// Canonical jitter-free render (reference exemplars and metric templates).
VectorXd render_canonical(const ContentSpec& content, const StyleSpec& style,
                          const ImageShape& shape);

/// per_pair images for every (content, style) pair; regenerable bit-exactly
/// from the same specs and seed.
StyleCorpus gen_corpus(std::span<const ContentSpec> contents, std::span<const StyleSpec> styles,
                       const ImageShape& shape, int per_pair, std::uint64_t seed);

/// Style alignment proxy in [0, 1]: one minus a normalized distance between
/// mean color and the K lowest 2-D Fourier magnitudes of the samples vs
/// canonical renders of the reference style. Higher is better.
double style_score(std::span<const VectorXd> samples, const StyleSpec& reference,
                   const ImageShape& shape, int k_low_freq = 16);

/// Content alignment proxy in [0, 1]: fraction of samples whose style-whitened
/// pixels best match the expected shape template under normalized
/// cross-correlation (searched over small translations).
double content_score(std::span<const VectorXd> samples, const ContentSpec& expected,
                     const ImageShape& shape);

}  // namespace snrflow
