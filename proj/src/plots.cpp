#include "roiforge/plots.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <vector>

#include "roiforge/error.hpp"

namespace fs = std::filesystem;

namespace roiforge::plots {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};

// Rows of 8-bit RGB pixels.
void write_rgb_png(const fs::path& path, std::size_t width, std::size_t height,
                   const std::vector<std::uint8_t>& rgb) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
    if (!file) {
        throw DataError(path.string() + ": cannot open for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError(path.string() + ": libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError(path.string() + ": PNG encoding failed");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) {
        png_write_row(png, rgb.data() + y * width * 3);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_overlay_png(const OverlayMap& map, const fs::path& path) {
    if (map.width == 0 || map.height == 0) {
        throw DataError("cannot plot an empty overlay map");
    }
    const auto region_max = std::max<std::uint64_t>(
        1, *std::max_element(map.region.begin(), map.region.end()));
    const auto lesion_max = std::max<std::uint64_t>(
        1, *std::max_element(map.lesion.begin(), map.lesion.end()));
    std::vector<std::uint8_t> rgb(map.width * map.height * 3);
    for (std::size_t y = 0; y < map.height; ++y) {
        for (std::size_t x = 0; x < map.width; ++x) {
            auto* px = &rgb[(y * map.width + x) * 3];
            const auto grey = static_cast<std::uint8_t>(200 * map.region_at(x, y) / region_max);
            px[0] = px[1] = px[2] = grey;
            if (const auto l = map.lesion_at(x, y); l != 0) {
                px[0] = static_cast<std::uint8_t>(128 + 127 * l / lesion_max);
                px[1] = px[2] = 0;
            }
        }
    }
    write_rgb_png(path, map.width, map.height, rgb);
}

void write_bars_png(std::span<const std::uint64_t> values, const fs::path& path,
                    std::size_t plot_height) {
    if (values.empty() || plot_height == 0) {
        throw DataError("cannot plot an empty series");
    }
    const auto peak = std::max<std::uint64_t>(1, *std::max_element(values.begin(), values.end()));
    const std::size_t width = values.size();
    std::vector<std::uint8_t> rgb(width * plot_height * 3, 255);
    for (std::size_t x = 0; x < width; ++x) {
        const std::size_t bar = static_cast<std::size_t>(values[x] * plot_height / peak);
        for (std::size_t k = 0; k < bar; ++k) {
            auto* px = &rgb[((plot_height - 1 - k) * width + x) * 3];
            px[0] = 40;
            px[1] = 70;
            px[2] = 160;
        }
    }
    write_rgb_png(path, width, plot_height, rgb);
}

void write_analysis_plots(const OverlayMap& map, const fs::path& dir, const std::string& prefix) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    write_overlay_png(map, dir / (prefix + "_overlay.png"));
    const auto [hx, hy] = axis_histograms(map);
    write_bars_png(hx.counts, dir / (prefix + "_hist_x.png"));
    write_bars_png(hy.counts, dir / (prefix + "_hist_y.png"));
    const auto profile = midline_profile(map);
    std::vector<std::uint64_t> extent(profile.extent.begin(), profile.extent.end());
    write_bars_png(extent, dir / (prefix + "_midline.png"));
}

}  // namespace roiforge::plots
