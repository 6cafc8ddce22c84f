#pragma once

#include "holo/container.hpp"
#include "holo/core.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

namespace holo::tools {

struct PreviewScaling {
    double min;
    double max;
};

/// 8-bit grayscale PNG of an image, scaled so min -> 0 and max -> 255.
/// Preview only: the scaling is lossy and recorded in a JSON sidecar.
inline PreviewScaling write_preview_png(const std::filesystem::path& path, const RealImage& img)
{
    const auto v = img.values();
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it;
    const double span = hi > lo ? hi - lo : 1.0;

    std::vector<png_byte> pixels(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        pixels[i] = static_cast<png_byte>(std::clamp((v[i] - lo) / span * 255.0 + 0.5, 0.0, 255.0));

    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp)
        throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "png encoding failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height(); ++y)
        png_write_row(png, pixels.data() + y * img.width());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    auto side = path;
    side.replace_extension(".png.json");
    io::write_json(side, {{"image", path.filename().string()},
                          {"kind", to_string(img.kind())},
                          {"scaling", "min-max"},
                          {"min", lo},
                          {"max", hi},
                          {"note", "8-bit preview; never used for metrics"}});
    return {lo, hi};
}

} // namespace holo::tools
