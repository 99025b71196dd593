/**
 * @file roi_optimizer.hpp
 * @brief Cohort-wide optimal-volume crop along the anterior-posterior axis
 *
 * Extents are measured on region-masked data. The cohort crop height is the
 * largest per-patient extent rounded up to a multiple (32 by default); each
 * patient's window sits flush against that patient's chest line and extends
 * anteriorly. Width and depth pass through unchanged.
 */
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "roiforge/volume.hpp"

namespace roiforge {

/// Which side of the image rows the chest wall lies on. The default treats
/// larger row indices as posterior, matching how slices are displayed.
enum class ChestSide { HighRows, LowRows };

std::string_view to_string(ChestSide side);
ChestSide parse_chest_side(std::string_view text);

struct RowSpan {
    std::size_t first = 0;
    std::size_t last = 0;
};

struct ExtentReport {
    std::string patient_id;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t depth = 0;
    double y_spacing = 1.0;
    ChestSide chest_side = ChestSide::HighRows;
    /// First/last non-zero row per slice; empty slices hold nullopt.
    std::vector<std::optional<RowSpan>> slice_rows;
    std::size_t y_min = 0;
    std::size_t y_max = 0;
    std::size_t chest_line = 0;
    std::size_t required_height = 0;
};

struct CropPlan {
    std::size_t required_height = 0;
    std::size_t crop_height = 0;
    std::size_t multiple = 32;
    std::size_t safe_distance_px = 0;
    double safe_distance_mm = 0.0;
    std::size_t image_height = 0;
    double y_spacing = 1.0;
    ChestSide chest_side = ChestSide::HighRows;
    std::size_t crop_width = 0;
    std::size_t crop_depth = 0;

    friend bool operator==(const CropPlan&, const CropPlan&) = default;
};

/// Rows [y_start, y_start + height) kept for one patient.
struct CropWindow {
    std::size_t y_start = 0;
    std::size_t height = 0;
    std::size_t chest_line = 0;

    friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

template <typename T>
ExtentReport scan_extent(const Grid<T>& masked, std::string patient_id = {},
                         ChestSide side = ChestSide::HighRows);

extern template ExtentReport scan_extent(const VolumeGrid&, std::string, ChestSide);
extern template ExtentReport scan_extent(const MaskGrid&, std::string, ChestSide);

CropPlan plan_crop(std::span<const ExtentReport> reports, std::size_t multiple = 32);

CropWindow crop_window(const CropPlan& plan, const ExtentReport& report);

template <typename T>
Grid<T> crop_rows(const Grid<T>& grid, const CropWindow& window) {
    if (window.height == 0 || window.y_start + window.height > grid.height()) {
        throw DataError("crop window rows [" + std::to_string(window.y_start) + ", " +
                        std::to_string(window.y_start + window.height) +
                        ") exceed image height " + std::to_string(grid.height()));
    }
    Shape shape = grid.shape();
    shape.height = window.height;
    Grid<T> out(shape, grid.spacing());
    for (std::size_t z = 0; z < shape.depth; ++z) {
        for (std::size_t y = 0; y < shape.height; ++y) {
            for (std::size_t x = 0; x < shape.width; ++x) {
                out.at(x, y, z) = grid.at(x, window.y_start + y, z);
            }
        }
    }
    if (const auto& aff = grid.affine()) {
        Affine shifted = *aff;
        const auto origin = aff->apply(0.0, static_cast<double>(window.y_start), 0.0);
        for (std::size_t r = 0; r < 3; ++r) {
            shifted.m[r][3] = origin[r];
        }
        out.set_affine(shifted);
    }
    return out;
}

/// Crops rows per the plan, anchored at the report's chest line.
template <typename T>
Grid<T> apply_crop(const Grid<T>& grid, const CropPlan& plan, const ExtentReport& report) {
    if (plan.crop_height > grid.height()) {
        throw DataError("crop height " + std::to_string(plan.crop_height) +
                        " exceeds image height " + std::to_string(grid.height()));
    }
    if (report.height != grid.height()) {
        throw DataError("extent report height does not match volume");
    }
    return crop_rows(grid, crop_window(plan, report));
}

}  // namespace roiforge
