/**
 * @file cohort_prep.hpp
 * @brief Builds the four dataset variants from paired contrast series
 *
 * WV_RAW  canonical originals, oversampled to the cohort's maximum depth
 * BRS_WV  region-masked, oversampled to the cohort's maximum depth
 * BRS_SLS region-masked, lesion slices only, oversampled to the cohort's
 *         maximum lesion-slice count
 * BRS_OV  BRS_SLS cropped in height by a CropPlan
 *
 * Label volumes go through exactly the same slice selection, oversampling
 * and crop as the images they belong to.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "roiforge/manifest.hpp"
#include "roiforge/roi_optimizer.hpp"
#include "roiforge/volume.hpp"

namespace roiforge {

struct PatientCase {
    std::string id;
    VolumeGrid pre_contrast;
    VolumeGrid first_post_contrast;
    std::optional<VolumeGrid> subtraction;
    MaskGrid region_mask;
    MaskGrid lesion_mask;

    /// Shared geometry and binary masks; throws DataError otherwise.
    void validate() const;
};

// ---- series pairing ----

enum class SeriesRole { PreContrast, FirstPostContrast, RegionMask, LesionMask, Unknown };

/// Keyword match on a series descriptor or file name, e.g. "t1_pre",
/// "FPC", "brs_mask", "lesion".
SeriesRole classify_series(std::string_view descriptor);

struct SeriesCandidate {
    std::filesystem::path path;
    std::string descriptor;
};

struct CaseFiles {
    std::string id;
    std::filesystem::path pre_contrast;
    std::filesystem::path first_post_contrast;
    std::filesystem::path region_mask;
    std::filesystem::path lesion_mask;
};

using PairingResult = std::variant<CaseFiles, Exclusion>;

/// A complete case, or an exclusion naming every missing element.
PairingResult pair_contrast_series(const std::string& patient_id,
                                   std::span<const SeriesCandidate> candidates);

/// Groups `<patient>_<descriptor>.nii[.gz]` files in a directory by patient
/// and pairs each group. Results are sorted by patient id.
std::vector<PairingResult> discover_cases(const std::filesystem::path& dir);

/// Loads all four series and reorients them to RAS.
PatientCase load_case(const CaseFiles& files);

// ---- per-volume operations ----

/// max(fpc - pc, 0) voxelwise.
VolumeGrid subtract(const VolumeGrid& fpc, const VolumeGrid& pc);

VolumeGrid apply_region_mask(const VolumeGrid& vol, const MaskGrid& mask);

/// Min-max scaling to [0, 1]; a constant volume becomes all zeros.
void normalize_minmax(VolumeGrid& vol);

/// Sorted z indices holding at least one lesion voxel.
std::vector<std::size_t> select_lesion_slices(const MaskGrid& lesion_mask);

/// Random duplicate slices (seeded, with replacement) placed directly after
/// their source; original slices keep their order.
OversampleMap plan_oversample(std::size_t depth, std::size_t target_depth, std::uint64_t seed);

template <typename T>
Grid<T> apply_oversample(const Grid<T>& grid, const OversampleMap& map) {
    if (map.source_slices.size() != map.target_depth) {
        throw DataError("oversample map length does not match its target depth");
    }
    return take_slices(grid, std::span<const std::size_t>(map.source_slices));
}

std::pair<VolumeGrid, OversampleMap> oversample_depth(const VolumeGrid& vol,
                                                      std::size_t target_depth,
                                                      std::uint64_t seed);

// ---- cohort assembly ----

/// Deferred case loader; assembly loads each case when it needs it so the
/// whole cohort never has to sit in memory at once.
struct CaseSource {
    std::string id;
    std::function<PatientCase()> load;
};

struct AssemblyParams {
    std::string cohort_id = "cohort";
    std::optional<CropPlan> crop_plan;
    bool normalize = true;
    std::size_t jobs = 1;
};

struct AssembledCase {
    ManifestEntry entry;
    VolumeGrid pre_contrast;
    VolumeGrid first_post_contrast;
    VolumeGrid subtraction;
    MaskGrid region_mask;
    MaskGrid lesion_mask;
};

/// Receives each finished case; may fill entry.files. Called concurrently
/// when jobs > 1.
using CaseSink = std::function<void(AssembledCase&)>;

/// Writes `<id>_{pc,fpc,sub,brs,lesion}.nii.gz` into out_dir and records
/// the relative names in the entry.
CaseSink write_case_files(const std::filesystem::path& out_dir);

/// Extent of region-or-lesion content over the lesion slices of one case.
/// nullopt when the case has no lesion slice.
std::optional<ExtentReport> lesion_slice_extent(const PatientCase& pc, ChestSide side);

/// Scans every case's lesion-slice stack and plans the cohort crop.
CropPlan plan_cohort_crop(std::span<const CaseSource> cases, std::size_t multiple,
                          ChestSide side, std::size_t jobs = 1);

CohortManifest assemble_approach(std::span<const CaseSource> cases, Approach approach,
                                 const AssemblyParams& params, std::uint64_t seed,
                                 const CaseSink& sink);

}  // namespace roiforge
