/**
 * @file manifest.hpp
 * @brief Cohort manifest: the JSON document every stage reads and writes
 *
 * File paths inside a manifest are stored relative to the manifest's own
 * directory so that a dataset can be moved as a unit.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "roiforge/roi_optimizer.hpp"
#include "roiforge/volume.hpp"

namespace roiforge {

inline constexpr int kManifestSchemaVersion = 1;

/// Dataset variant. `Source` tags the unprocessed input cohort (e.g. the
/// phantom generator's output), which need not have uniform shape.
enum class Approach { Source, WvRaw, BrsWv, BrsSls, BrsOv };

std::string_view to_string(Approach approach);
Approach parse_approach(std::string_view text);

/// The four dataset variants in build order.
inline constexpr Approach kAllApproaches[] = {Approach::WvRaw, Approach::BrsWv, Approach::BrsSls,
                                              Approach::BrsOv};

/// Output slice i is a copy of source slice source_slices[i].
struct OversampleMap {
    std::size_t target_depth = 0;
    std::vector<std::size_t> source_slices;

    friend bool operator==(const OversampleMap&, const OversampleMap&) = default;
};

struct PatientFiles {
    std::filesystem::path pre_contrast;
    std::filesystem::path first_post_contrast;
    std::filesystem::path subtraction;
    std::filesystem::path region_mask;
    std::filesystem::path lesion_mask;
};

struct ManifestEntry {
    std::string id;
    PatientFiles files;
    Shape shape;
    Spacing spacing;
    std::optional<OversampleMap> oversample;
    std::optional<std::vector<std::size_t>> selected_slices;
    std::optional<CropWindow> crop;
};

struct Exclusion {
    std::string id;
    std::string reason;

    friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

struct CohortManifest {
    int schema_version = kManifestSchemaVersion;
    std::string cohort_id;
    Approach approach = Approach::Source;
    std::uint64_t seed = 0;
    std::string normalization = "none";
    std::optional<CropPlan> crop_plan;
    std::vector<ManifestEntry> patients;
    std::vector<Exclusion> excluded;

    /// Directory the relative file paths resolve against. Not serialised.
    std::filesystem::path base_dir;

    [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const;
    [[nodiscard]] const ManifestEntry& find(std::string_view id) const;
};

CohortManifest read_manifest(const std::filesystem::path& path);

/// Writes pretty-printed JSON.
void write_manifest(const CohortManifest& manifest, const std::filesystem::path& path);

std::string manifest_to_json(const CohortManifest& manifest);
CohortManifest manifest_from_json(std::string_view text, const std::string& origin = "manifest");

/// Checks unique ids, that every referenced file exists, and (except for
/// Source manifests) that every patient shares one shape. Throws DataError
/// naming the first problem found.
void validate_manifest(const CohortManifest& manifest);

}  // namespace roiforge
