/**
 * @file phantom.hpp
 * @brief Synthetic DCE-like cohorts with exact region and lesion ground truth
 *
 * Each breast is a half-ellipsoid whose flat face lies on a chest line at a
 * fixed image row; tissue grows toward smaller row indices (anteriorly).
 * Everything on the far side of the chest line is body, optionally with a
 * strongly enhancing "heart" blob. Lesions are ellipsoids placed fully
 * inside a breast; they only show up after contrast.
 */
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "roiforge/cohort_prep.hpp"
#include "roiforge/manifest.hpp"
#include "roiforge/volume.hpp"

namespace roiforge {

template <typename T>
struct Range {
    T lo{};
    T hi{};
};

struct PhantomSpec {
    std::size_t patients = 8;
    Shape shape{64, 64, 20};
    /// Per-patient depth is drawn from [depth_min, shape.depth]; 0 means
    /// every patient has shape.depth slices.
    std::size_t depth_min = 0;
    Spacing spacing{1.0, 1.0, 2.0};

    double chest_row_fraction = 0.72;
    Range<double> breast_depth_fraction{0.3, 0.45};
    Range<double> breast_half_width_fraction{0.17, 0.22};
    Range<double> breast_half_slab_fraction{0.38, 0.48};
    double jitter_px = 2.0;

    Range<std::size_t> lesions{1, 3};
    Range<double> lesion_radius_mm{2.0, 4.0};
    double contrast = 200.0;

    bool heart = true;
    bool anterior_noise = true;
    std::uint64_t seed = 7;

    /// Throws UsageError for impossible parameters.
    void validate() const;
};

struct Ellipsoid {
    std::array<double, 3> center{};
    std::array<double, 3> radii{};

    [[nodiscard]] bool contains(double x, double y, double z) const noexcept;
};

/// Half-ellipsoid resting on the chest line (in voxel units).
struct BreastShape {
    double center_x = 0.0;
    double center_z = 0.0;
    double half_width = 1.0;
    double depth = 1.0;
    double half_slab = 1.0;
};

struct PatientGeometry {
    std::string id;
    Shape shape;
    Spacing spacing;
    std::size_t chest_row = 0;
    std::vector<BreastShape> breasts;
    std::vector<Ellipsoid> lesions;
    std::optional<Ellipsoid> heart;
    bool anterior_noise = true;
    double contrast = 200.0;
    std::uint64_t noise_seed = 0;

    [[nodiscard]] bool in_breast(std::size_t x, std::size_t y, std::size_t z) const noexcept;
};

std::string phantom_patient_id(std::size_t index);

/// Random geometry for patient `index`, deterministic in (spec.seed, index).
PatientGeometry draw_geometry(const PhantomSpec& spec, std::size_t index);

/// Rasterises a geometry into PC/FPC volumes and region/lesion masks.
PatientCase render_patient(const PatientGeometry& geometry);

/// In-memory loaders for every patient of the spec.
std::vector<CaseSource> phantom_sources(const PhantomSpec& spec);

/// Writes `<id>_{pc,fpc,brs,lesion}.nii.gz` plus manifest.json (approach
/// SOURCE) into out_dir.
CohortManifest generate_cohort(const PhantomSpec& spec, const std::filesystem::path& out_dir,
                               std::size_t jobs = 1);

}  // namespace roiforge
