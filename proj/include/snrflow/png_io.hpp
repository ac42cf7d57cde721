#pragma once

#include <filesystem>

#include "snrflow/types.hpp"

namespace snrflow {

/// 8-bit RGB PNG; values are mapped from [-1, 1] to [0, 255] with clamping.
/// Requires a 3-channel image.
void write_png_rgb8(const std::filesystem::path& path, const VectorXd& image,
                    const ImageShape& shape);

}  // namespace snrflow
