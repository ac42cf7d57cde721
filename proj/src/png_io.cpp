#include "snrflow/png_io.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include <png.h>

namespace snrflow {

void write_png_rgb8(const std::filesystem::path& path, const VectorXd& image,
                    const ImageShape& shape) {
    if (shape.channels != 3)
        throw std::invalid_argument("write_png_rgb8: expected a 3-channel image");
    if (image.size() != shape.size())
        throw std::invalid_argument("write_png_rgb8: image size does not match shape");

    std::vector<png_byte> rows(static_cast<std::size_t>(shape.height) * shape.width * 3);
    for (int y = 0; y < shape.height; ++y)
        for (int x = 0; x < shape.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v =
                    image[static_cast<Eigen::Index>(c) * shape.pixels() + y * shape.width + x];
                const double mapped = std::round((v + 1.0) / 2.0 * 255.0);
                rows[(static_cast<std::size_t>(y) * shape.width + x) * 3 + c] =
                    static_cast<png_byte>(std::min(255.0, std::max(0.0, mapped)));
            }

    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw std::runtime_error("write_png_rgb8: cannot open " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("write_png_rgb8: libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("write_png_rgb8: libpng error writing " + path.string());
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(shape.width),
                 static_cast<png_uint_32>(shape.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < shape.height; ++y)
        png_write_row(png, rows.data() + static_cast<std::size_t>(y) * shape.width * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace snrflow
