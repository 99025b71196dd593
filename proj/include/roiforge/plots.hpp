#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "roiforge/cohort_analytics.hpp"

namespace roiforge::plots {

/// Region counts in grey, lesion counts in red on top; one pixel per cell.
void write_overlay_png(const OverlayMap& map, const std::filesystem::path& path);

/// Simple bar chart, one bar per entry, scaled to the maximum value.
void write_bars_png(std::span<const std::uint64_t> values, const std::filesystem::path& path,
                    std::size_t plot_height = 128);

/// overlay.png, hist_x.png, hist_y.png and midline.png in `dir`.
void write_analysis_plots(const OverlayMap& map, const std::filesystem::path& dir,
                          const std::string& prefix);

}  // namespace roiforge::plots
