/**
 * @file seg_metrics.hpp
 * @brief Overlap metrics and false-positive / false-negative lesion analysis
 *
 * Dice = 2TP / (2TP + FP + FN), IoU = TP / (TP + FP + FN),
 * Precision = TP / (TP + FP), Recall = TP / (TP + FN).
 * A zero denominator means both masks are empty there; the metric is 1.
 *
 * Components are maximal 26-connected sets. A predicted component with no
 * voxel on the ground truth is a false positive; a ground-truth component
 * with no voxel on the prediction is a false negative. Partial detections
 * are neither.
 */
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roiforge/volume.hpp"

namespace roiforge {

/// 1 where prob >= threshold. Values must lie in [0, 1].
MaskGrid binarize(const VolumeGrid& prob, double threshold = 0.5);

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + fn + tn; }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const MaskGrid& pred, const MaskGrid& gt);

double dice(const ConfusionCounts& c);
double iou(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);

struct ComponentLabels {
    /// 0 = background, components numbered 1..count in raster order of
    /// their first voxel.
    std::vector<std::uint32_t> labels;
    std::uint32_t count = 0;
};

/// Connectivity 6, 18 or 26.
ComponentLabels label_components(const MaskGrid& mask, int connectivity = 26);

/// Half-open physical-volume bins: [0, e0), [e0, e1), ..., [e_last, inf).
class VolumeBins {
public:
    VolumeBins() = default;
    explicit VolumeBins(std::vector<double> edges);

    [[nodiscard]] std::size_t count() const noexcept { return edges_.size() + 1; }
    [[nodiscard]] std::size_t bin_of(double volume_mm3) const noexcept;
    [[nodiscard]] std::string label(std::size_t bin) const;
    [[nodiscard]] const std::vector<double>& edges() const noexcept { return edges_; }

private:
    std::vector<double> edges_{10.0, 20.0};
};

struct Component {
    std::uint64_t voxels = 0;
    double volume_mm3 = 0.0;
    std::size_t bin = 0;
    std::array<double, 3> centroid{};
    std::size_t z_first = 0;
    std::size_t z_last = 0;
};

struct ComponentReport {
    std::vector<Component> false_positives;
    std::vector<Component> false_negatives;
    int connectivity = 26;
    double threshold = 0.5;
    VolumeBins bins;

    [[nodiscard]] std::vector<std::size_t> fp_bin_counts() const;
    [[nodiscard]] std::vector<std::size_t> fn_bin_counts() const;
};

ComponentReport component_analysis(const MaskGrid& pred, const MaskGrid& gt,
                                   const Spacing& spacing, double threshold = 0.5,
                                   const VolumeBins& bins = {}, int connectivity = 26);

struct CaseEvaluation {
    std::string id;
    ConfusionCounts counts;
    double dice = 0.0;
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    ComponentReport components;
};

CaseEvaluation evaluate_case(std::string id, const VolumeGrid& prob, const MaskGrid& gt,
                             double threshold = 0.5, const VolumeBins& bins = {});

struct EvaluationSummary {
    std::size_t cases = 0;
    double dice_avg = 0.0;
    double iou_avg = 0.0;
    double precision_avg = 0.0;
    double recall_avg = 0.0;
    std::vector<std::size_t> fp_bins;
    std::vector<std::size_t> fn_bins;
};

/// Unweighted per-case means and summed component bin counts.
EvaluationSummary summarize(std::span<const CaseEvaluation> cases);

}  // namespace roiforge
