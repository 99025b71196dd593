#include "roiforge/cohort_analytics.hpp"

#include <algorithm>

namespace roiforge {

void OverlayMap::add(const MaskGrid& region_mask, const MaskGrid& lesion_mask) {
    if (!(region_mask.shape() == lesion_mask.shape())) {
        throw DataError("region and lesion masks differ in shape");
    }
    if (region.empty() && lesion.empty() && width == 0 && height == 0) {
        *this = OverlayMap(region_mask.width(), region_mask.height());
    }
    if (region_mask.width() != width || region_mask.height() != height) {
        throw DataError("mask in-plane shape " + to_string(region_mask.shape()) +
                        " does not match overlay map " + std::to_string(width) + "x" +
                        std::to_string(height));
    }
    const std::size_t plane = width * height;
    for (std::size_t z = 0; z < region_mask.depth(); ++z) {
        auto r = region_mask.slice(z);
        auto l = lesion_mask.slice(z);
        for (std::size_t i = 0; i < plane; ++i) {
            region[i] += r[i] != 0 ? 1 : 0;
            lesion[i] += l[i] != 0 ? 1 : 0;
        }
    }
    ++patients;
    slices += region_mask.depth();
}

void OverlayMap::merge(const OverlayMap& other) {
    if (other.width == 0 && other.height == 0) {
        return;
    }
    if (width == 0 && height == 0) {
        *this = other;
        return;
    }
    if (other.width != width || other.height != height) {
        throw DataError("cannot merge overlay maps of different sizes");
    }
    for (std::size_t i = 0; i < region.size(); ++i) {
        region[i] += other.region[i];
        lesion[i] += other.lesion[i];
    }
    patients += other.patients;
    slices += other.slices;
}

OverlayMap overlay_map(std::span<const MaskPair> masks) {
    OverlayMap map;
    for (const auto& m : masks) {
        map.add(*m.region, *m.lesion);
    }
    return map;
}

std::pair<AxisHistogram, AxisHistogram> axis_histograms(const OverlayMap& map) {
    AxisHistogram hx{Axis::X, std::vector<std::uint64_t>(map.width, 0)};
    AxisHistogram hy{Axis::Y, std::vector<std::uint64_t>(map.height, 0)};
    for (std::size_t y = 0; y < map.height; ++y) {
        for (std::size_t x = 0; x < map.width; ++x) {
            const auto v = map.lesion_at(x, y);
            hx.counts[x] += v;
            hy.counts[y] += v;
        }
    }
    return {std::move(hx), std::move(hy)};
}

MidlineProfile midline_profile(const OverlayMap& map) {
    MidlineProfile profile;
    profile.extent.assign(map.width, 0);
    for (std::size_t x = 0; x < map.width; ++x) {
        std::optional<std::size_t> first;
        std::size_t last = 0;
        for (std::size_t y = 0; y < map.height; ++y) {
            if (map.region_at(x, y) != 0) {
                if (!first) {
                    first = y;
                }
                last = y;
            }
        }
        if (first) {
            profile.extent[x] = last - *first + 1;
            if (profile.extent[x] > profile.h_max_mid) {
                profile.h_max_mid = profile.extent[x];
                profile.argmax_column = x;
            }
        }
    }
    return profile;
}

std::vector<BudgetEntry> pixel_budget(std::span<const CohortManifest> manifests) {
    std::optional<Shape> reference;
    for (const auto& m : manifests) {
        if (m.approach == Approach::WvRaw && !m.patients.empty()) {
            reference = m.patients.front().shape;
            break;
        }
    }
    if (!reference && !manifests.empty() && !manifests.front().patients.empty()) {
        reference = manifests.front().patients.front().shape;
    }
    std::vector<BudgetEntry> out;
    for (const auto& m : manifests) {
        if (m.patients.empty()) {
            throw DataError("manifest " + m.cohort_id + " has no patients");
        }
        BudgetEntry e;
        e.approach = m.approach;
        e.shape = m.patients.front().shape;
        e.voxels_per_patient = e.shape.voxels();
        if (reference) {
            e.voxel_ratio = static_cast<double>(e.voxels_per_patient) /
                            static_cast<double>(reference->voxels());
            e.slice_ratio = static_cast<double>(e.shape.depth) /
                            static_cast<double>(reference->depth);
        }
        out.push_back(e);
    }
    return out;
}

}  // namespace roiforge
