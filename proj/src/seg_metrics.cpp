#include "roiforge/seg_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace roiforge {

MaskGrid binarize(const VolumeGrid& prob, double threshold) {
    auto out = prob.like<std::uint8_t>();
    auto src = prob.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const float v = src[i];
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw DataError("probability value " + std::to_string(v) + " outside [0, 1]");
        }
        dst[i] = static_cast<double>(v) >= threshold ? 1 : 0;
    }
    return out;
}

ConfusionCounts confusion(const MaskGrid& pred, const MaskGrid& gt) {
    if (!(pred.shape() == gt.shape())) {
        throw DataError("prediction shape " + to_string(pred.shape()) +
                        " does not match ground truth " + to_string(gt.shape()));
    }
    ConfusionCounts c;
    auto p = pred.data();
    auto g = gt.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pp = p[i] != 0;
        const bool gg = g[i] != 0;
        if (pp && gg) {
            ++c.tp;
        } else if (pp) {
            ++c.fp;
        } else if (gg) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

namespace {

double ratio_or_one(double num, double den) {
    return den == 0.0 ? 1.0 : num / den;
}

}  // namespace

double dice(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp);
    return ratio_or_one(2.0 * tp, 2.0 * tp + static_cast<double>(c.fn) + static_cast<double>(c.fp));
}

double iou(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp);
    return ratio_or_one(tp, tp + static_cast<double>(c.fn) + static_cast<double>(c.fp));
}

double precision(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp);
    return ratio_or_one(tp, tp + static_cast<double>(c.fp));
}

double recall(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp);
    return ratio_or_one(tp, tp + static_cast<double>(c.fn));
}

namespace {

class DisjointSets {
public:
    std::uint32_t make() {
        parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
        return parent_.back();
    }

    std::uint32_t find(std::uint32_t a) {
        std::uint32_t root = a;
        while (parent_[root] != root) {
            root = parent_[root];
        }
        while (parent_[a] != root) {
            const std::uint32_t next = parent_[a];
            parent_[a] = root;
            a = next;
        }
        return root;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            // Smaller id stays root so raster order is kept.
            if (a < b) {
                parent_[b] = a;
            } else {
                parent_[a] = b;
            }
        }
    }

private:
    std::vector<std::uint32_t> parent_;
};

struct Offset {
    int dx, dy, dz;
};

std::vector<Offset> backward_neighbours(int connectivity) {
    const int max_manhattan = connectivity == 6 ? 1 : connectivity == 18 ? 2 : 3;
    std::vector<Offset> out;
    for (int dz = -1; dz <= 0; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const bool earlier = dz < 0 || (dz == 0 && dy < 0) || (dz == 0 && dy == 0 && dx < 0);
                if (earlier && std::abs(dx) + std::abs(dy) + std::abs(dz) <= max_manhattan) {
                    out.push_back({dx, dy, dz});
                }
            }
        }
    }
    return out;
}

}  // namespace

ComponentLabels label_components(const MaskGrid& mask, int connectivity) {
    if (connectivity != 6 && connectivity != 18 && connectivity != 26) {
        throw UsageError("connectivity must be 6, 18 or 26");
    }
    const auto offsets = backward_neighbours(connectivity);
    const auto w = static_cast<long>(mask.width());
    const auto h = static_cast<long>(mask.height());
    const auto d = static_cast<long>(mask.depth());

    // Provisional labels are 1-based; 0 stays background.
    std::vector<std::uint32_t> provisional(mask.size(), 0);
    DisjointSets sets;
    sets.make();  // slot 0 unused
    for (long z = 0; z < d; ++z) {
        for (long y = 0; y < h; ++y) {
            for (long x = 0; x < w; ++x) {
                const std::size_t idx = mask.index(x, y, z);
                if (mask.data()[idx] == 0) {
                    continue;
                }
                std::uint32_t label = 0;
                for (const auto& o : offsets) {
                    const long nx = x + o.dx;
                    const long ny = y + o.dy;
                    const long nz = z + o.dz;
                    if (nx < 0 || ny < 0 || nz < 0 || nx >= w || ny >= h) {
                        continue;
                    }
                    const std::uint32_t neighbour = provisional[mask.index(nx, ny, nz)];
                    if (neighbour == 0) {
                        continue;
                    }
                    if (label == 0) {
                        label = neighbour;
                    } else if (neighbour != label) {
                        sets.unite(label, neighbour);
                    }
                }
                provisional[idx] = label != 0 ? label : sets.make();
            }
        }
    }

    ComponentLabels result;
    result.labels.assign(mask.size(), 0);
    std::vector<std::uint32_t> final_id;
    for (std::size_t i = 0; i < provisional.size(); ++i) {
        if (provisional[i] == 0) {
            continue;
        }
        const std::uint32_t root = sets.find(provisional[i]);
        if (final_id.size() <= root) {
            final_id.resize(root + 1, 0);
        }
        if (final_id[root] == 0) {
            final_id[root] = ++result.count;
        }
        result.labels[i] = final_id[root];
    }
    return result;
}

VolumeBins::VolumeBins(std::vector<double> edges) : edges_(std::move(edges)) {
    if (!std::is_sorted(edges_.begin(), edges_.end()) ||
        std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
        throw UsageError("volume bin edges must be strictly increasing");
    }
    if (!edges_.empty() && edges_.front() <= 0.0) {
        throw UsageError("volume bin edges must be positive");
    }
}

std::size_t VolumeBins::bin_of(double volume_mm3) const noexcept {
    return static_cast<std::size_t>(
        std::upper_bound(edges_.begin(), edges_.end(), volume_mm3) - edges_.begin());
}

std::string VolumeBins::label(std::size_t bin) const {
    auto fmt = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };
    if (edges_.empty()) {
        return "all";
    }
    if (bin == 0) {
        return "V<" + fmt(edges_.front());
    }
    if (bin >= edges_.size()) {
        return "V>=" + fmt(edges_.back());
    }
    return fmt(edges_[bin - 1]) + "<=V<" + fmt(edges_[bin]);
}

std::vector<std::size_t> ComponentReport::fp_bin_counts() const {
    std::vector<std::size_t> counts(bins.count(), 0);
    for (const auto& c : false_positives) {
        ++counts[c.bin];
    }
    return counts;
}

std::vector<std::size_t> ComponentReport::fn_bin_counts() const {
    std::vector<std::size_t> counts(bins.count(), 0);
    for (const auto& c : false_negatives) {
        ++counts[c.bin];
    }
    return counts;
}

namespace {

// Components of `mask` that share no voxel with `other`.
std::vector<Component> unmatched_components(const MaskGrid& mask, const MaskGrid& other,
                                            const Spacing& spacing, const VolumeBins& bins,
                                            int connectivity) {
    const ComponentLabels cc = label_components(mask, connectivity);
    std::vector<Component> comps(cc.count);
    std::vector<bool> touches(cc.count, false);
    std::vector<std::array<double, 3>> sums(cc.count, {0.0, 0.0, 0.0});
    std::vector<bool> seen(cc.count, false);

    const auto o = other.data();
    for (std::size_t z = 0; z < mask.depth(); ++z) {
        for (std::size_t y = 0; y < mask.height(); ++y) {
            for (std::size_t x = 0; x < mask.width(); ++x) {
                const std::size_t idx = mask.index(x, y, z);
                const std::uint32_t label = cc.labels[idx];
                if (label == 0) {
                    continue;
                }
                const std::size_t k = label - 1;
                Component& c = comps[k];
                ++c.voxels;
                sums[k][0] += static_cast<double>(x);
                sums[k][1] += static_cast<double>(y);
                sums[k][2] += static_cast<double>(z);
                if (!seen[k]) {
                    c.z_first = z;
                    seen[k] = true;
                }
                c.z_last = z;
                if (o[idx] != 0) {
                    touches[k] = true;
                }
            }
        }
    }

    std::vector<Component> out;
    const double voxel_volume = spacing.voxel_volume();
    for (std::size_t k = 0; k < comps.size(); ++k) {
        if (touches[k]) {
            continue;
        }
        Component c = comps[k];
        const auto n = static_cast<double>(c.voxels);
        c.centroid = {sums[k][0] / n, sums[k][1] / n, sums[k][2] / n};
        c.volume_mm3 = n * voxel_volume;
        c.bin = bins.bin_of(c.volume_mm3);
        out.push_back(c);
    }
    return out;
}

}  // namespace

ComponentReport component_analysis(const MaskGrid& pred, const MaskGrid& gt,
                                   const Spacing& spacing, double threshold,
                                   const VolumeBins& bins, int connectivity) {
    if (!(pred.shape() == gt.shape())) {
        throw DataError("prediction shape " + to_string(pred.shape()) +
                        " does not match ground truth " + to_string(gt.shape()));
    }
    if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0)) {
        throw DataError("voxel spacing must be positive");
    }
    ComponentReport report;
    report.connectivity = connectivity;
    report.threshold = threshold;
    report.bins = bins;
    report.false_positives = unmatched_components(pred, gt, spacing, bins, connectivity);
    report.false_negatives = unmatched_components(gt, pred, spacing, bins, connectivity);
    return report;
}

CaseEvaluation evaluate_case(std::string id, const VolumeGrid& prob, const MaskGrid& gt,
                             double threshold, const VolumeBins& bins) {
    const MaskGrid pred = binarize(prob, threshold);
    CaseEvaluation e;
    e.id = std::move(id);
    e.counts = confusion(pred, gt);
    e.dice = dice(e.counts);
    e.iou = iou(e.counts);
    e.precision = precision(e.counts);
    e.recall = recall(e.counts);
    e.components = component_analysis(pred, gt, gt.spacing(), threshold, bins);
    return e;
}

EvaluationSummary summarize(std::span<const CaseEvaluation> cases) {
    EvaluationSummary s;
    s.cases = cases.size();
    if (cases.empty()) {
        return s;
    }
    s.fp_bins.assign(cases.front().components.bins.count(), 0);
    s.fn_bins.assign(cases.front().components.bins.count(), 0);
    for (const auto& c : cases) {
        s.dice_avg += c.dice;
        s.iou_avg += c.iou;
        s.precision_avg += c.precision;
        s.recall_avg += c.recall;
        const auto fp = c.components.fp_bin_counts();
        const auto fn = c.components.fn_bin_counts();
        for (std::size_t b = 0; b < s.fp_bins.size() && b < fp.size(); ++b) {
            s.fp_bins[b] += fp[b];
            s.fn_bins[b] += fn[b];
        }
    }
    const auto n = static_cast<double>(cases.size());
    s.dice_avg /= n;
    s.iou_avg /= n;
    s.precision_avg /= n;
    s.recall_avg /= n;
    return s;
}

}  // namespace roiforge
