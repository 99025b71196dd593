#include "roiforge/roi_optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace roiforge {

std::string_view to_string(ChestSide side) {
    return side == ChestSide::HighRows ? "high_rows" : "low_rows";
}

ChestSide parse_chest_side(std::string_view text) {
    if (text == "high_rows" || text == "high") {
        return ChestSide::HighRows;
    }
    if (text == "low_rows" || text == "low") {
        return ChestSide::LowRows;
    }
    throw UsageError("unknown chest side '" + std::string(text) + "' (expected high or low)");
}

template <typename T>
ExtentReport scan_extent(const Grid<T>& masked, std::string patient_id, ChestSide side) {
    ExtentReport report;
    report.patient_id = std::move(patient_id);
    report.width = masked.width();
    report.height = masked.height();
    report.depth = masked.depth();
    report.y_spacing = masked.spacing().y;
    report.chest_side = side;
    report.slice_rows.resize(masked.depth());

    bool any = false;
    for (std::size_t z = 0; z < masked.depth(); ++z) {
        std::optional<RowSpan> rows;
        for (std::size_t y = 0; y < masked.height(); ++y) {
            bool row_has_content = false;
            for (std::size_t x = 0; x < masked.width(); ++x) {
                if (masked.at(x, y, z) != T{}) {
                    row_has_content = true;
                    break;
                }
            }
            if (!row_has_content) {
                continue;
            }
            if (!rows) {
                rows = RowSpan{y, y};
            }
            rows->last = y;
        }
        if (rows) {
            if (!any) {
                report.y_min = rows->first;
                report.y_max = rows->last;
                any = true;
            }
            report.y_min = std::min(report.y_min, rows->first);
            report.y_max = std::max(report.y_max, rows->last);
        }
        report.slice_rows[z] = rows;
    }
    if (!any) {
        throw DataError("no breast content" +
                        (report.patient_id.empty() ? std::string() : " in patient " + report.patient_id));
    }
    report.chest_line = side == ChestSide::HighRows ? report.y_max : report.y_min;
    report.required_height = report.y_max - report.y_min + 1;
    return report;
}

template ExtentReport scan_extent(const VolumeGrid&, std::string, ChestSide);
template ExtentReport scan_extent(const MaskGrid&, std::string, ChestSide);

CropPlan plan_crop(std::span<const ExtentReport> reports, std::size_t multiple) {
    if (reports.empty()) {
        throw DataError("cannot plan a crop for an empty cohort");
    }
    if (multiple == 0) {
        throw UsageError("crop multiple must be positive");
    }
    const ExtentReport& first = reports.front();
    CropPlan plan;
    plan.multiple = multiple;
    plan.image_height = first.height;
    plan.y_spacing = first.y_spacing;
    plan.chest_side = first.chest_side;
    plan.crop_width = first.width;
    for (const auto& r : reports) {
        if (r.height != first.height || r.width != first.width) {
            throw DataError("patient " + r.patient_id + " has a different in-plane shape");
        }
        if (std::abs(r.y_spacing - first.y_spacing) > 1e-4) {
            throw DataError("patient " + r.patient_id + " has a different y spacing");
        }
        if (r.chest_side != first.chest_side) {
            throw DataError("extent reports disagree on chest side");
        }
        plan.required_height = std::max(plan.required_height, r.required_height);
        plan.crop_depth = std::max(plan.crop_depth, r.depth);
    }
    if (plan.required_height > plan.image_height) {
        throw DataError("required height " + std::to_string(plan.required_height) +
                        " exceeds image height " + std::to_string(plan.image_height));
    }
    plan.crop_height = (plan.required_height + multiple - 1) / multiple * multiple;
    plan.safe_distance_px = plan.crop_height - plan.required_height;
    plan.safe_distance_mm = static_cast<double>(plan.safe_distance_px) * plan.y_spacing;
    return plan;
}

CropWindow crop_window(const CropPlan& plan, const ExtentReport& report) {
    if (plan.crop_height > report.height) {
        throw DataError("crop height " + std::to_string(plan.crop_height) +
                        " exceeds image height " + std::to_string(report.height));
    }
    CropWindow window;
    window.height = plan.crop_height;
    window.chest_line = report.chest_line;
    if (plan.chest_side == ChestSide::HighRows) {
        // Window ends at the chest line; pinned to row 0 if it would underflow.
        window.y_start = report.chest_line + 1 >= plan.crop_height
                             ? report.chest_line + 1 - plan.crop_height
                             : 0;
    } else {
        window.y_start = std::min(report.chest_line, report.height - plan.crop_height);
    }
    return window;
}

}  // namespace roiforge
