/**
 * @file pipeline.hpp
 * @brief Stage functions behind the command-line subcommands
 *
 * Every stage reads and writes files (manifests, NIfTI volumes, JSON
 * reports) so that the subcommands can be run one at a time or chained by
 * run_pipeline. Reports carry no timestamps or host details; the same
 * inputs and seed produce byte-identical output.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "roiforge/cohort_analytics.hpp"
#include "roiforge/cohort_prep.hpp"
#include "roiforge/manifest.hpp"
#include "roiforge/phantom.hpp"
#include "roiforge/seg_metrics.hpp"
#include "roiforge/serialization.hpp"
#include "roiforge/sustainability.hpp"

namespace roiforge {

/// Serialises a JSON document the way every report file is written:
/// sorted keys, two-space indent, trailing newline.
std::string dump_report(const Json& doc);
void write_report(const Json& doc, const std::filesystem::path& path);

// ---- cohort inputs ----

struct CohortInput {
    std::string cohort_id;
    std::vector<CaseSource> sources;
    /// Patients dropped while pairing series (directory inputs only).
    std::vector<Exclusion> excluded;
};

/// Lazy loaders for every patient of a manifest. Volumes are reoriented to
/// RAS when they carry orientation metadata.
std::vector<CaseSource> sources_from_manifest(const CohortManifest& manifest);

/// Accepts a manifest file, a directory holding manifest.json, or a
/// directory of `<patient>_<series>.nii[.gz]` files.
CohortInput open_cohort(const std::filesystem::path& input);

// ---- prep ----

struct PrepOptions {
    std::vector<Approach> approaches{std::begin(kAllApproaches), std::end(kAllApproaches)};
    std::uint64_t seed = 0;
    std::size_t multiple = 32;
    ChestSide chest_side = ChestSide::HighRows;
    bool normalize = true;
    std::size_t jobs = 1;
};

struct PrepResult {
    std::optional<CropPlan> crop_plan;
    /// One per requested approach, in request order; each written to
    /// `<out>/<APPROACH>/manifest.json`.
    std::vector<CohortManifest> manifests;
};

PrepResult prepare_cohort(const CohortInput& input, const PrepOptions& options,
                          const std::filesystem::path& out_dir);

// ---- optimize ----

/// Plans the crop on a BRS_SLS manifest and writes the cropped BRS_OV
/// dataset (volumes plus manifest.json) into out_dir.
CohortManifest optimize_manifest(const CohortManifest& sls, std::size_t multiple,
                                 ChestSide side, const std::filesystem::path& out_dir,
                                 std::size_t jobs = 1);

// ---- analyze ----

struct ManifestAnalysis {
    Approach approach = Approach::Source;
    std::string cohort_id;
    OverlayMap overlay;
    AxisHistogram x_hist;
    AxisHistogram y_hist;
    MidlineProfile midline;
};

ManifestAnalysis analyze_manifest(const CohortManifest& manifest, std::size_t jobs = 1);

/// include_maps adds the full overlay count maps (height rows of width
/// values each).
Json analysis_to_json(const ManifestAnalysis& analysis, bool include_maps);

Json budget_to_json(const std::vector<BudgetEntry>& budget);

// ---- evaluate ----

/// Patient id of a prediction or label file: the file name without its
/// NIfTI extension and without a trailing _prob, _pred, _lesion, _label,
/// _gt or _seg.
std::string id_from_filename(const std::filesystem::path& path);

struct EvaluationRun {
    std::vector<CaseEvaluation> cases;
    EvaluationSummary summary;
    /// Ground-truth ids without a prediction; they are not scored.
    std::vector<std::string> unscored;
};

/// Scores every probability volume in pred_dir against the matching label
/// in `gt`, which is a directory of label files, a manifest file, or a
/// directory holding manifest.json. A prediction without a label is a
/// DataError.
EvaluationRun evaluate_predictions(const std::filesystem::path& pred_dir,
                                   const std::filesystem::path& gt, double threshold,
                                   const VolumeBins& bins, std::size_t jobs = 1);

Json evaluation_to_json(const EvaluationRun& run, double threshold, const VolumeBins& bins);

/// Reference predictor used when no trained model is available: the
/// subtraction image rescaled to [0, 1] and used as a lesion probability.
/// Writes `<id>_prob.nii.gz` for every patient of the manifest.
void write_enhancement_baseline(const CohortManifest& manifest,
                                const std::filesystem::path& out_dir, std::size_t jobs = 1);

// ---- footprint ----

/// "LABEL=path" or a bare path (label = file name without extension).
std::pair<std::string, std::filesystem::path> parse_labeled_path(const std::string& text);

Json footprint_to_json(const std::vector<EnergySummary>& groups, double grid_intensity);

// ---- full pipeline ----

struct PipelineConfig {
    /// Cohort input; when empty a phantom cohort is generated from `phantom`
    /// into `<out>/source`.
    std::filesystem::path input;
    std::filesystem::path out;
    PhantomSpec phantom;
    std::vector<Approach> approaches{std::begin(kAllApproaches), std::end(kAllApproaches)};
    std::uint64_t seed = 7;
    std::size_t multiple = 32;
    ChestSide chest_side = ChestSide::HighRows;
    double threshold = 0.5;
    std::vector<double> bin_edges{10.0, 20.0};
    bool plots = false;
    bool normalize = true;
    std::size_t jobs = 1;
    double grid_intensity = kDefaultGridIntensity;
    /// Trainer timing logs keyed by approach label, e.g. {"BRS_OV", path}.
    std::vector<std::pair<std::string, std::filesystem::path>> train_logs;

    /// Checks parameters and every referenced input path. Throws UsageError
    /// for bad parameters and DataError for missing inputs.
    void validate() const;
};

Json config_to_json(const PipelineConfig& config);

/// Runs every stage and writes `<out>/report.json`; returns the report.
Json run_pipeline(const PipelineConfig& config);

}  // namespace roiforge
