#include "roiforge/cohort_prep.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "roiforge/parallel.hpp"
#include "roiforge/seeding.hpp"
#include "roiforge/volume_io.hpp"

namespace fs = std::filesystem;

namespace roiforge {

void PatientCase::validate() const {
    auto check = [this](const auto& grid, const char* what) {
        if (!grid.same_geometry(pre_contrast)) {
            throw DataError("patient " + id + ": " + what + " geometry " +
                            to_string(grid.shape()) + " does not match pre-contrast " +
                            to_string(pre_contrast.shape()));
        }
    };
    check(first_post_contrast, "first post-contrast");
    check(region_mask, "region mask");
    check(lesion_mask, "lesion mask");
    if (subtraction) {
        check(*subtraction, "subtraction");
    }
    require_binary(region_mask, "patient " + id + " region mask");
    require_binary(lesion_mask, "patient " + id + " lesion mask");
}

// ---- pairing ----

namespace {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

bool any_token(const std::vector<std::string>& tokens, std::initializer_list<std::string_view> keys) {
    return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
        return std::find(keys.begin(), keys.end(), t) != keys.end();
    });
}

std::string strip_nifti_extension(std::string name) {
    for (std::string_view ext : {".nii.gz", ".nii"}) {
        if (name.size() > ext.size() && name.ends_with(ext)) {
            return name.substr(0, name.size() - ext.size());
        }
    }
    return name;
}

}  // namespace

SeriesRole classify_series(std::string_view descriptor) {
    const auto tokens = tokenize(descriptor);
    if (any_token(tokens, {"lesion", "lesions", "label", "labels", "gt", "seg", "annotation"})) {
        return SeriesRole::LesionMask;
    }
    if (any_token(tokens, {"brs", "region", "breastmask", "mask"})) {
        return SeriesRole::RegionMask;
    }
    if (any_token(tokens, {"sub", "subtraction"})) {
        return SeriesRole::Unknown;
    }
    if (any_token(tokens, {"fpc", "post", "post1", "postcontrast", "firstpost", "ph1"})) {
        return SeriesRole::FirstPostContrast;
    }
    if (any_token(tokens, {"pc", "pre", "precontrast", "native", "ph0"})) {
        return SeriesRole::PreContrast;
    }
    return SeriesRole::Unknown;
}

PairingResult pair_contrast_series(const std::string& patient_id,
                                   std::span<const SeriesCandidate> candidates) {
    if (candidates.empty()) {
        return Exclusion{patient_id, "no series"};
    }
    std::map<SeriesRole, std::vector<fs::path>> by_role;
    for (const auto& c : candidates) {
        by_role[classify_series(c.descriptor)].push_back(c.path);
    }

    std::vector<std::string> problems;
    auto pick = [&](SeriesRole role, const char* name) -> fs::path {
        auto it = by_role.find(role);
        if (it == by_role.end()) {
            problems.push_back(std::string("missing ") + name);
            return {};
        }
        if (it->second.size() > 1) {
            problems.push_back(std::string("ambiguous ") + name + " (" +
                               std::to_string(it->second.size()) + " candidates)");
            return {};
        }
        return it->second.front();
    };

    CaseFiles files;
    files.id = patient_id;
    files.pre_contrast = pick(SeriesRole::PreContrast, "pre-contrast");
    files.first_post_contrast = pick(SeriesRole::FirstPostContrast, "first post-contrast");
    files.region_mask = pick(SeriesRole::RegionMask, "region mask");
    files.lesion_mask = pick(SeriesRole::LesionMask, "lesion mask");
    if (!problems.empty()) {
        std::string reason = problems.front();
        for (std::size_t i = 1; i < problems.size(); ++i) {
            reason += "; " + problems[i];
        }
        return Exclusion{patient_id, reason};
    }
    return files;
}

std::vector<PairingResult> discover_cases(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw DataError(dir.string() + ": directory not found");
    }
    std::map<std::string, std::vector<SeriesCandidate>> groups;
    for (const auto& item : fs::directory_iterator(dir)) {
        if (!item.is_regular_file()) {
            continue;
        }
        const std::string name = item.path().filename().string();
        const std::string stem = strip_nifti_extension(name);
        if (stem == name) {
            continue;
        }
        const auto sep = stem.find('_');
        if (sep == std::string::npos || sep == 0) {
            continue;
        }
        groups[stem.substr(0, sep)].push_back({item.path(), stem.substr(sep + 1)});
    }
    std::vector<PairingResult> results;
    for (auto& [id, candidates] : groups) {
        std::sort(candidates.begin(), candidates.end(),
                  [](const auto& a, const auto& b) { return a.path < b.path; });
        results.push_back(pair_contrast_series(id, candidates));
    }
    return results;
}

PatientCase load_case(const CaseFiles& files) {
    PatientCase pc;
    pc.id = files.id;
    pc.pre_contrast = canonicalize_ras(load_volume(files.pre_contrast));
    pc.first_post_contrast = canonicalize_ras(load_volume(files.first_post_contrast));
    pc.region_mask = canonicalize_ras(load_mask(files.region_mask));
    pc.lesion_mask = canonicalize_ras(load_mask(files.lesion_mask));
    pc.validate();
    return pc;
}

// ---- per-volume operations ----

VolumeGrid subtract(const VolumeGrid& fpc, const VolumeGrid& pc) {
    if (!fpc.same_geometry(pc)) {
        throw DataError("subtraction inputs differ in geometry: " + to_string(fpc.shape()) +
                        " vs " + to_string(pc.shape()));
    }
    VolumeGrid out = fpc;
    auto dst = out.data();
    auto sub = pc.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = std::max(dst[i] - sub[i], 0.0f);
    }
    return out;
}

VolumeGrid apply_region_mask(const VolumeGrid& vol, const MaskGrid& mask) {
    if (!vol.same_geometry(mask)) {
        throw DataError("region mask geometry " + to_string(mask.shape()) +
                        " does not match volume " + to_string(vol.shape()));
    }
    require_binary(mask, "region mask");
    VolumeGrid out = vol;
    auto dst = out.data();
    auto m = mask.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (m[i] == 0) {
            dst[i] = 0.0f;
        }
    }
    return out;
}

void normalize_minmax(VolumeGrid& vol) {
    auto data = vol.data();
    const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
    const float lo = *lo_it;
    const float hi = *hi_it;
    if (hi <= lo) {
        std::fill(data.begin(), data.end(), 0.0f);
        return;
    }
    const double range = static_cast<double>(hi) - static_cast<double>(lo);
    for (auto& v : data) {
        v = static_cast<float>((static_cast<double>(v) - lo) / range);
    }
}

std::vector<std::size_t> select_lesion_slices(const MaskGrid& lesion_mask) {
    std::vector<std::size_t> slices;
    for (std::size_t z = 0; z < lesion_mask.depth(); ++z) {
        auto s = lesion_mask.slice(z);
        if (std::any_of(s.begin(), s.end(), [](std::uint8_t v) { return v != 0; })) {
            slices.push_back(z);
        }
    }
    return slices;
}

OversampleMap plan_oversample(std::size_t depth, std::size_t target_depth, std::uint64_t seed) {
    if (depth == 0) {
        throw DataError("cannot oversample an empty volume");
    }
    if (target_depth < depth) {
        throw DataError("target depth " + std::to_string(target_depth) +
                        " is smaller than current depth " + std::to_string(depth));
    }
    std::vector<std::size_t> copies(depth, 1);
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, depth - 1);
    for (std::size_t k = depth; k < target_depth; ++k) {
        ++copies[pick(rng)];
    }
    OversampleMap map;
    map.target_depth = target_depth;
    map.source_slices.reserve(target_depth);
    for (std::size_t z = 0; z < depth; ++z) {
        map.source_slices.insert(map.source_slices.end(), copies[z], z);
    }
    return map;
}

std::pair<VolumeGrid, OversampleMap> oversample_depth(const VolumeGrid& vol,
                                                      std::size_t target_depth,
                                                      std::uint64_t seed) {
    OversampleMap map = plan_oversample(vol.depth(), target_depth, seed);
    VolumeGrid out = apply_oversample(vol, map);
    return {std::move(out), std::move(map)};
}

// ---- assembly ----

namespace {

MaskGrid mask_union(const MaskGrid& a, const MaskGrid& b) {
    MaskGrid out = a;
    auto dst = out.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<std::uint8_t>(dst[i] | src[i]);
    }
    return out;
}

struct CaseSummary {
    Shape shape;
    Spacing spacing;
    std::size_t lesion_slices = 0;
};

bool uses_region_mask(Approach a) {
    return a == Approach::BrsWv || a == Approach::BrsSls || a == Approach::BrsOv;
}

bool uses_lesion_slices(Approach a) {
    return a == Approach::BrsSls || a == Approach::BrsOv;
}

}  // namespace

CaseSink write_case_files(const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) {
        throw DataError(out_dir.string() + ": cannot create output directory");
    }
    return [out_dir](AssembledCase& c) {
        const std::string& id = c.entry.id;
        c.entry.files.pre_contrast = id + "_pc.nii.gz";
        c.entry.files.first_post_contrast = id + "_fpc.nii.gz";
        c.entry.files.subtraction = id + "_sub.nii.gz";
        c.entry.files.region_mask = id + "_brs.nii.gz";
        c.entry.files.lesion_mask = id + "_lesion.nii.gz";
        save_volume(c.pre_contrast, out_dir / c.entry.files.pre_contrast);
        save_volume(c.first_post_contrast, out_dir / c.entry.files.first_post_contrast);
        save_volume(c.subtraction, out_dir / c.entry.files.subtraction);
        save_mask(c.region_mask, out_dir / c.entry.files.region_mask);
        save_mask(c.lesion_mask, out_dir / c.entry.files.lesion_mask);
    };
}

std::optional<ExtentReport> lesion_slice_extent(const PatientCase& pc, ChestSide side) {
    const auto slices = select_lesion_slices(pc.lesion_mask);
    if (slices.empty()) {
        return std::nullopt;
    }
    const MaskGrid content = mask_union(take_slices(pc.region_mask, std::span(slices)),
                                        take_slices(pc.lesion_mask, std::span(slices)));
    return scan_extent(content, pc.id, side);
}

CropPlan plan_cohort_crop(std::span<const CaseSource> cases, std::size_t multiple,
                          ChestSide side, std::size_t jobs) {
    std::vector<std::optional<ExtentReport>> found(cases.size());
    parallel_for(cases.size(), jobs, [&](std::size_t i) {
        PatientCase pc = cases[i].load();
        pc.validate();
        found[i] = lesion_slice_extent(pc, side);
    });
    std::vector<ExtentReport> reports;
    for (auto& r : found) {
        if (r) {
            reports.push_back(std::move(*r));
        }
    }
    if (reports.empty()) {
        throw DataError("no patient has lesion slices; cannot plan an optimal-volume crop");
    }
    return plan_crop(reports, multiple);
}

CohortManifest assemble_approach(std::span<const CaseSource> cases, Approach approach,
                                 const AssemblyParams& params, std::uint64_t seed,
                                 const CaseSink& sink) {
    if (approach == Approach::Source) {
        throw UsageError("SOURCE is not an assembly approach");
    }
    if (approach == Approach::BrsOv && !params.crop_plan) {
        throw DataError("BRS_OV assembly requires a crop plan");
    }
    if (cases.empty()) {
        throw DataError("cohort has no patients");
    }

    // Pass 1: geometry and lesion-slice counts fix the uniform target depth.
    std::vector<CaseSummary> summaries(cases.size());
    parallel_for(cases.size(), params.jobs, [&](std::size_t i) {
        PatientCase pc = cases[i].load();
        pc.validate();
        summaries[i] = CaseSummary{pc.pre_contrast.shape(), pc.pre_contrast.spacing(),
                                   select_lesion_slices(pc.lesion_mask).size()};
    });

    CohortManifest manifest;
    manifest.cohort_id = params.cohort_id;
    manifest.approach = approach;
    manifest.seed = seed;
    manifest.normalization = params.normalize ? "minmax_per_volume" : "none";
    if (approach == Approach::BrsOv) {
        manifest.crop_plan = params.crop_plan;
    }

    std::vector<bool> included(cases.size(), true);
    std::size_t target_depth = 0;
    const CaseSummary* reference = nullptr;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const CaseSummary& s = summaries[i];
        if (uses_lesion_slices(approach) && s.lesion_slices == 0) {
            included[i] = false;
            manifest.excluded.push_back({cases[i].id, "no lesion slices"});
            continue;
        }
        if (!reference) {
            reference = &s;
        } else {
            if (s.shape.width != reference->shape.width ||
                s.shape.height != reference->shape.height) {
                throw DataError("patient " + cases[i].id + " in-plane shape " +
                                to_string(s.shape) + " differs from cohort " +
                                to_string(reference->shape));
            }
            if (!spacing_close(s.spacing, reference->spacing)) {
                throw DataError("patient " + cases[i].id + " has inconsistent voxel spacing");
            }
        }
        target_depth = std::max(target_depth,
                                uses_lesion_slices(approach) ? s.lesion_slices : s.shape.depth);
    }
    if (!reference) {
        throw DataError("no patient qualifies for " + std::string(to_string(approach)));
    }

    // Pass 2: build, crop, oversample and hand each case to the sink.
    std::vector<std::optional<ManifestEntry>> entries(cases.size());
    parallel_for(cases.size(), params.jobs, [&](std::size_t i) {
        if (!included[i]) {
            return;
        }
        PatientCase pc = cases[i].load();
        pc.validate();

        AssembledCase out;
        out.entry.id = pc.id;
        if (uses_region_mask(approach)) {
            out.pre_contrast = apply_region_mask(pc.pre_contrast, pc.region_mask);
            out.first_post_contrast = apply_region_mask(pc.first_post_contrast, pc.region_mask);
        } else {
            out.pre_contrast = std::move(pc.pre_contrast);
            out.first_post_contrast = std::move(pc.first_post_contrast);
        }
        out.subtraction = subtract(out.first_post_contrast, out.pre_contrast);
        out.region_mask = std::move(pc.region_mask);
        out.lesion_mask = std::move(pc.lesion_mask);

        if (uses_lesion_slices(approach)) {
            const auto slices = select_lesion_slices(out.lesion_mask);
            const std::span<const std::size_t> keep(slices);
            out.pre_contrast = take_slices(out.pre_contrast, keep);
            out.first_post_contrast = take_slices(out.first_post_contrast, keep);
            out.subtraction = take_slices(out.subtraction, keep);
            out.region_mask = take_slices(out.region_mask, keep);
            out.lesion_mask = take_slices(out.lesion_mask, keep);
            out.entry.selected_slices = slices;
        }

        if (approach == Approach::BrsOv) {
            const CropPlan& plan = *params.crop_plan;
            const ExtentReport report = scan_extent(
                mask_union(out.region_mask, out.lesion_mask), pc.id, plan.chest_side);
            out.pre_contrast = apply_crop(out.pre_contrast, plan, report);
            out.first_post_contrast = apply_crop(out.first_post_contrast, plan, report);
            out.subtraction = apply_crop(out.subtraction, plan, report);
            out.region_mask = apply_crop(out.region_mask, plan, report);
            out.lesion_mask = apply_crop(out.lesion_mask, plan, report);
            out.entry.crop = crop_window(plan, report);
        }

        const OversampleMap map =
            plan_oversample(out.pre_contrast.depth(), target_depth, derive_seed(seed, pc.id));
        out.pre_contrast = apply_oversample(out.pre_contrast, map);
        out.first_post_contrast = apply_oversample(out.first_post_contrast, map);
        out.subtraction = apply_oversample(out.subtraction, map);
        out.region_mask = apply_oversample(out.region_mask, map);
        out.lesion_mask = apply_oversample(out.lesion_mask, map);
        out.entry.oversample = map;

        if (params.normalize) {
            normalize_minmax(out.pre_contrast);
            normalize_minmax(out.first_post_contrast);
            normalize_minmax(out.subtraction);
        }
        out.entry.shape = out.pre_contrast.shape();
        out.entry.spacing = out.pre_contrast.spacing();
        if (sink) {
            sink(out);
        }
        entries[i] = std::move(out.entry);
    });

    for (auto& e : entries) {
        if (e) {
            manifest.patients.push_back(std::move(*e));
        }
    }
    return manifest;
}

}  // namespace roiforge
