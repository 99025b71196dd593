#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "roiforge/manifest.hpp"
#include "roiforge/volume.hpp"

namespace roiforge {

/// In-plane accumulation of region and lesion masks over every
/// (patient, slice) pair of a cohort.
struct OverlayMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint64_t> region;
    std::vector<std::uint64_t> lesion;
    std::size_t patients = 0;
    std::size_t slices = 0;

    OverlayMap() = default;
    OverlayMap(std::size_t w, std::size_t h)
        : width(w), height(h), region(w * h, 0), lesion(w * h, 0) {}

    [[nodiscard]] std::uint64_t region_at(std::size_t x, std::size_t y) const {
        return region[x + width * y];
    }
    [[nodiscard]] std::uint64_t lesion_at(std::size_t x, std::size_t y) const {
        return lesion[x + width * y];
    }

    /// Adds one patient's masks.
    void add(const MaskGrid& region_mask, const MaskGrid& lesion_mask);

    /// Cellwise sum with another map of the same size.
    void merge(const OverlayMap& other);

    friend bool operator==(const OverlayMap&, const OverlayMap&) = default;
};

struct MaskPair {
    const MaskGrid* region = nullptr;
    const MaskGrid* lesion = nullptr;
};

OverlayMap overlay_map(std::span<const MaskPair> masks);

enum class Axis { X, Y };

struct AxisHistogram {
    Axis axis = Axis::X;
    std::vector<std::uint64_t> counts;
};

/// x[i] sums lesion column i over rows, y[j] sums lesion row j over columns.
std::pair<AxisHistogram, AxisHistogram> axis_histograms(const OverlayMap& map);

struct MidlineProfile {
    /// Row extent (last - first + 1) of region presence per column, 0 if empty.
    std::vector<std::size_t> extent;
    std::size_t h_max_mid = 0;
    /// Column achieving h_max_mid (first one on ties); nullopt for an empty map.
    std::optional<std::size_t> argmax_column;
};

MidlineProfile midline_profile(const OverlayMap& map);

struct BudgetEntry {
    Approach approach = Approach::Source;
    Shape shape;
    std::uint64_t voxels_per_patient = 0;
    /// Ratios against the WV_RAW manifest, or the first manifest when no
    /// WV_RAW manifest was supplied.
    std::optional<double> voxel_ratio;
    std::optional<double> slice_ratio;
};

/// Voxels analysed per patient for each manifest.
std::vector<BudgetEntry> pixel_budget(std::span<const CohortManifest> manifests);

}  // namespace roiforge
