#include "roiforge/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "roiforge/error.hpp"
#include "roiforge/parallel.hpp"
#include "roiforge/plots.hpp"
#include "roiforge/volume_io.hpp"

namespace fs = std::filesystem;

namespace roiforge {

std::string dump_report(const Json& doc) { return doc.dump(2) + "\n"; }

void write_report(const Json& doc, const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(path.string() + ": cannot open for writing");
    }
    out << dump_report(doc);
    if (!out) {
        throw DataError(path.string() + ": write failed");
    }
}

namespace {

template <typename T>
Grid<T> to_ras_if_oriented(Grid<T> grid) {
    if (grid.orientation()) {
        return canonicalize_ras(grid);
    }
    return grid;
}

MaskGrid union_of(const MaskGrid& a, const MaskGrid& b) {
    MaskGrid out = a;
    auto o = out.data();
    const auto bb = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        o[i] = static_cast<std::uint8_t>(o[i] | bb[i]);
    }
    return out;
}

bool is_nifti(const fs::path& p) {
    const std::string name = p.filename().string();
    return name.ends_with(".nii") || name.ends_with(".nii.gz");
}

fs::path manifest_path_for(const fs::path& p) {
    if (fs::is_regular_file(p)) {
        return p;
    }
    if (fs::is_directory(p) && fs::is_regular_file(p / "manifest.json")) {
        return p / "manifest.json";
    }
    return {};
}

void require_exists(const fs::path& p) {
    if (!fs::exists(p)) {
        throw DataError(p.string() + ": file not found");
    }
}

}  // namespace

// ---------------------------------------------------------------- inputs

std::vector<CaseSource> sources_from_manifest(const CohortManifest& manifest) {
    std::vector<CaseSource> sources;
    sources.reserve(manifest.patients.size());
    for (const ManifestEntry& e : manifest.patients) {
        PatientFiles files{manifest.resolve(e.files.pre_contrast),
                           manifest.resolve(e.files.first_post_contrast), {},
                           manifest.resolve(e.files.region_mask),
                           manifest.resolve(e.files.lesion_mask)};
        sources.push_back({e.id, [id = e.id, files] {
                               PatientCase pc{
                                   id,
                                   to_ras_if_oriented(load_volume(files.pre_contrast)),
                                   to_ras_if_oriented(load_volume(files.first_post_contrast)),
                                   std::nullopt,
                                   to_ras_if_oriented(load_mask(files.region_mask)),
                                   to_ras_if_oriented(load_mask(files.lesion_mask))};
                               return pc;
                           }});
    }
    return sources;
}

CohortInput open_cohort(const fs::path& input) {
    require_exists(input);
    CohortInput out;
    if (const fs::path mpath = manifest_path_for(input); !mpath.empty()) {
        CohortManifest m = read_manifest(mpath);
        validate_manifest(m);
        out.cohort_id = m.cohort_id;
        out.sources = sources_from_manifest(m);
        out.excluded = m.excluded;
    } else {
        out.cohort_id = input.filename().string();
        if (out.cohort_id.empty()) {
            out.cohort_id = input.parent_path().filename().string();
        }
        for (auto& result : discover_cases(input)) {
            if (auto* files = std::get_if<CaseFiles>(&result)) {
                out.sources.push_back({files->id, [f = *files] { return load_case(f); }});
            } else {
                out.excluded.push_back(std::get<Exclusion>(result));
            }
        }
    }
    if (out.sources.empty()) {
        throw DataError(input.string() + ": no complete patient case found");
    }
    return out;
}

// ---------------------------------------------------------------- prep

PrepResult prepare_cohort(const CohortInput& input, const PrepOptions& options,
                          const fs::path& out_dir) {
    if (options.approaches.empty()) {
        throw UsageError("no approach selected");
    }
    PrepResult result;
    const bool needs_plan = std::find(options.approaches.begin(), options.approaches.end(),
                                      Approach::BrsOv) != options.approaches.end();
    if (needs_plan) {
        result.crop_plan =
            plan_cohort_crop(input.sources, options.multiple, options.chest_side, options.jobs);
    }

    AssemblyParams params;
    params.cohort_id = input.cohort_id;
    params.crop_plan = result.crop_plan;
    params.normalize = options.normalize;
    params.jobs = options.jobs;

    for (Approach approach : options.approaches) {
        const fs::path dir = out_dir / std::string(to_string(approach));
        CohortManifest m = assemble_approach(input.sources, approach, params, options.seed,
                                             write_case_files(dir));
        m.excluded.insert(m.excluded.begin(), input.excluded.begin(), input.excluded.end());
        m.base_dir = dir;
        write_manifest(m, dir / "manifest.json");
        result.manifests.push_back(std::move(m));
    }
    return result;
}

// ---------------------------------------------------------------- optimize

CohortManifest optimize_manifest(const CohortManifest& sls, std::size_t multiple,
                                 ChestSide side, const fs::path& out_dir, std::size_t jobs) {
    if (sls.approach != Approach::BrsSls) {
        throw DataError("optimize expects a BRS_SLS manifest, got " +
                        std::string(to_string(sls.approach)));
    }
    validate_manifest(sls);
    for (const auto& e : sls.patients) {
        if (e.files.subtraction.empty()) {
            throw DataError("manifest entry " + e.id + " has no subtraction volume");
        }
    }

    const auto sources = sources_from_manifest(sls);
    const CropPlan plan = plan_cohort_crop(sources, multiple, side, jobs);

    CohortManifest ov = sls;
    ov.approach = Approach::BrsOv;
    ov.crop_plan = plan;
    ov.base_dir = out_dir;

    const CaseSink sink = write_case_files(out_dir);
    parallel_for(sls.patients.size(), jobs, [&](std::size_t i) {
        const ManifestEntry& src = sls.patients[i];
        AssembledCase c;
        c.region_mask = load_mask(sls.resolve(src.files.region_mask));
        c.lesion_mask = load_mask(sls.resolve(src.files.lesion_mask));
        const ExtentReport report =
            scan_extent(union_of(c.region_mask, c.lesion_mask), src.id, side);
        c.pre_contrast = apply_crop(load_volume(sls.resolve(src.files.pre_contrast)), plan, report);
        c.first_post_contrast =
            apply_crop(load_volume(sls.resolve(src.files.first_post_contrast)), plan, report);
        c.subtraction = apply_crop(load_volume(sls.resolve(src.files.subtraction)), plan, report);
        c.region_mask = apply_crop(c.region_mask, plan, report);
        c.lesion_mask = apply_crop(c.lesion_mask, plan, report);

        c.entry = src;
        c.entry.crop = crop_window(plan, report);
        c.entry.shape = c.pre_contrast.shape();
        sink(c);
        ov.patients[i] = std::move(c.entry);
    });

    write_manifest(ov, out_dir / "manifest.json");
    return ov;
}

// ---------------------------------------------------------------- analyze

ManifestAnalysis analyze_manifest(const CohortManifest& manifest, std::size_t jobs) {
    validate_manifest(manifest);
    if (manifest.patients.empty()) {
        throw DataError("manifest " + manifest.cohort_id + " lists no patients");
    }
    std::vector<OverlayMap> partial(manifest.patients.size());
    parallel_for(manifest.patients.size(), jobs, [&](std::size_t i) {
        const ManifestEntry& e = manifest.patients[i];
        const MaskGrid region = to_ras_if_oriented(load_mask(manifest.resolve(e.files.region_mask)));
        const MaskGrid lesion = to_ras_if_oriented(load_mask(manifest.resolve(e.files.lesion_mask)));
        OverlayMap map(region.width(), region.height());
        map.add(region, lesion);
        partial[i] = std::move(map);
    });

    ManifestAnalysis a;
    a.approach = manifest.approach;
    a.cohort_id = manifest.cohort_id;
    a.overlay = std::move(partial.front());
    for (std::size_t i = 1; i < partial.size(); ++i) {
        if (partial[i].width != a.overlay.width || partial[i].height != a.overlay.height) {
            throw DataError("patient " + manifest.patients[i].id +
                            " has a different in-plane size; overlay maps need one size");
        }
        a.overlay.merge(partial[i]);
    }
    std::tie(a.x_hist, a.y_hist) = axis_histograms(a.overlay);
    a.midline = midline_profile(a.overlay);
    return a;
}

namespace {

Json rows_of(const std::vector<std::uint64_t>& cells, std::size_t width, std::size_t height) {
    Json rows = Json::array();
    for (std::size_t y = 0; y < height; ++y) {
        rows.push_back(std::vector<std::uint64_t>(cells.begin() + static_cast<long>(y * width),
                                                  cells.begin() + static_cast<long>((y + 1) * width)));
    }
    return rows;
}

std::uint64_t total(const std::vector<std::uint64_t>& v) {
    std::uint64_t s = 0;
    for (auto x : v) s += x;
    return s;
}

}  // namespace

Json analysis_to_json(const ManifestAnalysis& a, bool include_maps) {
    Json j;
    j["approach"] = std::string(to_string(a.approach));
    j["cohort_id"] = a.cohort_id;
    j["width"] = a.overlay.width;
    j["height"] = a.overlay.height;
    j["patients"] = a.overlay.patients;
    j["slices"] = a.overlay.slices;
    j["region_voxel_slices"] = total(a.overlay.region);
    j["lesion_voxel_slices"] = total(a.overlay.lesion);
    j["lesion_x_histogram"] = a.x_hist.counts;
    j["lesion_y_histogram"] = a.y_hist.counts;
    j["midline"] = {{"extent_per_column", a.midline.extent},
                    {"h_max_mid", a.midline.h_max_mid},
                    {"argmax_column", a.midline.argmax_column
                                          ? Json(*a.midline.argmax_column)
                                          : Json(nullptr)}};
    if (include_maps) {
        j["overlay"] = {{"region", rows_of(a.overlay.region, a.overlay.width, a.overlay.height)},
                        {"lesion", rows_of(a.overlay.lesion, a.overlay.width, a.overlay.height)}};
    }
    return j;
}

Json budget_to_json(const std::vector<BudgetEntry>& budget) {
    Json arr = Json::array();
    for (const auto& b : budget) {
        arr.push_back({{"approach", std::string(to_string(b.approach))},
                       {"shape", b.shape},
                       {"voxels_per_patient", b.voxels_per_patient},
                       {"voxel_ratio", b.voxel_ratio ? Json(*b.voxel_ratio) : Json(nullptr)},
                       {"slice_ratio", b.slice_ratio ? Json(*b.slice_ratio) : Json(nullptr)}});
    }
    return arr;
}

// ---------------------------------------------------------------- evaluate

std::string id_from_filename(const fs::path& path) {
    std::string name = path.filename().string();
    for (const char* ext : {".gz", ".nii"}) {
        if (name.ends_with(ext)) {
            name.resize(name.size() - std::char_traits<char>::length(ext));
        }
    }
    for (const char* suffix : {"_prob", "_pred", "_lesion", "_label", "_gt", "_seg"}) {
        const std::size_t n = std::char_traits<char>::length(suffix);
        if (name.size() > n && name.ends_with(suffix)) {
            name.resize(name.size() - n);
            break;
        }
    }
    return name;
}

namespace {

std::map<std::string, fs::path> collect_by_id(const fs::path& dir) {
    std::map<std::string, fs::path> found;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_nifti(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const std::string id = id_from_filename(f);
        const auto [it, fresh] = found.emplace(id, f);
        if (!fresh) {
            throw DataError("patient " + id + " has two volumes in " + dir.string() + ": " +
                            it->second.filename().string() + " and " + f.filename().string());
        }
    }
    return found;
}

std::map<std::string, fs::path> ground_truth_by_id(const fs::path& gt) {
    require_exists(gt);
    if (const fs::path mpath = manifest_path_for(gt); !mpath.empty()) {
        const CohortManifest m = read_manifest(mpath);
        std::map<std::string, fs::path> out;
        for (const auto& e : m.patients) {
            out[e.id] = m.resolve(e.files.lesion_mask);
        }
        return out;
    }
    return collect_by_id(gt);
}

}  // namespace

EvaluationRun evaluate_predictions(const fs::path& pred_dir, const fs::path& gt,
                                   double threshold, const VolumeBins& bins, std::size_t jobs) {
    require_exists(pred_dir);
    if (!fs::is_directory(pred_dir)) {
        throw DataError(pred_dir.string() + ": not a directory");
    }
    const auto preds = collect_by_id(pred_dir);
    if (preds.empty()) {
        throw DataError(pred_dir.string() + ": no prediction volumes (.nii or .nii.gz)");
    }
    const auto labels = ground_truth_by_id(gt);

    std::vector<std::pair<std::string, fs::path>> work(preds.begin(), preds.end());
    for (const auto& [id, path] : work) {
        if (!labels.contains(id)) {
            throw DataError(path.string() + ": no ground truth for patient " + id);
        }
        require_exists(labels.at(id));
    }

    EvaluationRun run;
    run.cases.resize(work.size());
    parallel_for(work.size(), jobs, [&](std::size_t i) {
        const auto& [id, path] = work[i];
        VolumeGrid prob = load_volume(path);
        MaskGrid truth = load_mask(labels.at(id));
        if (prob.orientation() && truth.orientation()) {
            prob = canonicalize_ras(prob);
            truth = canonicalize_ras(truth);
        }
        if (prob.shape() != truth.shape()) {
            throw DataError(path.string() + ": shape " + to_string(prob.shape()) +
                            " does not match ground truth " + to_string(truth.shape()));
        }
        try {
            run.cases[i] = evaluate_case(id, prob, truth, threshold, bins);
        } catch (const DataError& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    });
    for (const auto& [id, _] : labels) {
        if (!preds.contains(id)) {
            run.unscored.push_back(id);
        }
    }
    run.summary = summarize(run.cases);
    return run;
}

namespace {

Json component_json(const Component& c, const VolumeBins& bins) {
    return {{"voxels", c.voxels},
            {"volume_mm3", c.volume_mm3},
            {"bin", bins.label(c.bin)},
            {"centroid", c.centroid},
            {"z_first", c.z_first},
            {"z_last", c.z_last}};
}

Json bin_counts(const std::vector<std::size_t>& counts, const VolumeBins& bins) {
    Json j = Json::object();
    for (std::size_t b = 0; b < counts.size(); ++b) {
        j[bins.label(b)] = counts[b];
    }
    return j;
}

}  // namespace

Json evaluation_to_json(const EvaluationRun& run, double threshold, const VolumeBins& bins) {
    Json overlap_cases = Json::array();
    Json component_cases = Json::array();
    std::size_t fp_total = 0;
    std::size_t fn_total = 0;
    for (const auto& c : run.cases) {
        overlap_cases.push_back({{"id", c.id},
                                 {"dice", c.dice},
                                 {"iou", c.iou},
                                 {"precision", c.precision},
                                 {"recall", c.recall},
                                 {"tp", c.counts.tp},
                                 {"fp", c.counts.fp},
                                 {"fn", c.counts.fn},
                                 {"tn", c.counts.tn}});
        Json fps = Json::array();
        Json fns = Json::array();
        for (const auto& comp : c.components.false_positives) fps.push_back(component_json(comp, bins));
        for (const auto& comp : c.components.false_negatives) fns.push_back(component_json(comp, bins));
        fp_total += c.components.false_positives.size();
        fn_total += c.components.false_negatives.size();
        component_cases.push_back({{"id", c.id},
                                   {"false_positives", fps},
                                   {"false_negatives", fns},
                                   {"fp_by_bin", bin_counts(c.components.fp_bin_counts(), bins)},
                                   {"fn_by_bin", bin_counts(c.components.fn_bin_counts(), bins)}});
    }

    std::vector<std::string> labels;
    for (std::size_t b = 0; b < bins.count(); ++b) labels.push_back(bins.label(b));

    const auto& s = run.summary;
    Json j;
    j["threshold"] = threshold;
    j["cases"] = s.cases;
    j["unscored"] = run.unscored;
    j["overlap_metrics"] = {
        {"per_case", overlap_cases},
        {"average",
         {{"dice", s.dice_avg}, {"iou", s.iou_avg}, {"precision", s.precision_avg},
          {"recall", s.recall_avg}}},
        {"averaging", "unweighted mean over patients"},
        {"empty_denominator", "a metric whose denominator is zero is reported as 1"}};
    j["lesion_components"] = {
        {"connectivity", 26},
        {"rule", "a component sharing no voxel with the other mask is a false positive "
                 "(predicted) or false negative (ground truth); partial overlaps are neither"},
        {"bins", {{"edges_mm3", bins.edges()},
                  {"labels", labels},
                  {"convention", "half-open intervals [lower, upper)"}}},
        {"per_case", component_cases},
        {"fp_by_bin", bin_counts(s.fp_bins.empty() ? std::vector<std::size_t>(bins.count(), 0)
                                                   : s.fp_bins,
                                 bins)},
        {"fn_by_bin", bin_counts(s.fn_bins.empty() ? std::vector<std::size_t>(bins.count(), 0)
                                                   : s.fn_bins,
                                 bins)},
        {"fp_total", fp_total},
        {"fn_total", fn_total}};
    return j;
}

void write_enhancement_baseline(const CohortManifest& manifest, const fs::path& out_dir,
                                std::size_t jobs) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) {
        throw DataError(out_dir.string() + ": cannot create output directory");
    }
    parallel_for(manifest.patients.size(), jobs, [&](std::size_t i) {
        const ManifestEntry& e = manifest.patients[i];
        if (e.files.subtraction.empty()) {
            throw DataError("manifest entry " + e.id + " has no subtraction volume");
        }
        VolumeGrid prob = load_volume(manifest.resolve(e.files.subtraction));
        normalize_minmax(prob);
        for (float& v : prob.data()) {
            v = std::clamp(v, 0.0f, 1.0f);
        }
        save_volume(prob, out_dir / (e.id + "_prob.nii.gz"));
    });
}

// ---------------------------------------------------------------- footprint

std::pair<std::string, fs::path> parse_labeled_path(const std::string& text) {
    const auto eq = text.find('=');
    if (eq != std::string::npos && eq > 0) {
        const std::string path = text.substr(eq + 1);
        if (path.empty()) {
            throw UsageError("missing path in '" + text + "'");
        }
        return {text.substr(0, eq), path};
    }
    if (text.empty()) {
        throw UsageError("empty log path");
    }
    const fs::path p(text);
    return {p.stem().string(), p};
}

Json footprint_to_json(const std::vector<EnergySummary>& groups, double grid_intensity) {
    Json arr = Json::array();
    Json warnings = Json::array();
    for (const auto& g : groups) {
        Json folds = Json::array();
        for (const auto& r : g.folds) {
            folds.push_back({{"fold", r.fold},
                             {"tt_seconds", r.tt_seconds},
                             {"cfp_kg", r.cfp},
                             {"norm_cfp", r.norm_cfp},
                             {"epochs", r.epochs},
                             {"best_epoch", r.best_epoch ? Json(*r.best_epoch) : Json(nullptr)}});
            if (r.norm_cfp < 0.0) {
                warnings.push_back(g.label + " fold " + std::to_string(r.fold) +
                                   ": norm_cfp is negative");
            }
        }
        if (g.norm_cfp < 0.0) {
            warnings.push_back(g.label + ": norm_cfp is negative");
        }
        arr.push_back({{"label", g.label},
                       {"folds", folds},
                       {"tt_minutes_mean", g.tt_minutes_mean},
                       {"tt_minutes_std", g.tt_minutes_std},
                       {"cfp_kg_mean", g.cfp_mean},
                       {"cfp_kg_std", g.cfp_std},
                       {"epochs_mean", g.epochs_mean},
                       {"epochs_std", g.epochs_std},
                       {"norm_cfp", g.norm_cfp},
                       {"minmax_cfp", g.minmax_cfp}});
    }
    return {{"grid_intensity_kg_per_kwh", grid_intensity},
            {"cfp_definition", "grid_intensity * tt_seconds / 3600 (kg CO2, 1 kW draw)"},
            {"norm_cfp_definition",
             "1 - (cfp_max - cfp_min) * (cfp / cfp_max); folds are compared within their log, "
             "groups by their mean CFP; values can fall below 0"},
            {"minmax_cfp_definition",
             "(cfp_max - cfp) / (cfp_max - cfp_min); conventional rescaling shown for comparison"},
            {"std", "sample standard deviation (n - 1)"},
            {"groups", arr},
            {"warnings", warnings}};
}

// ---------------------------------------------------------------- pipeline

void PipelineConfig::validate() const {
    if (out.empty()) {
        throw UsageError("an output directory is required");
    }
    if (approaches.empty()) {
        throw UsageError("no approach selected");
    }
    std::set<Approach> seen;
    for (Approach a : approaches) {
        if (a == Approach::Source) {
            throw UsageError("SOURCE is not an assembly approach");
        }
        if (!seen.insert(a).second) {
            throw UsageError("approach " + std::string(to_string(a)) + " listed twice");
        }
    }
    if (multiple == 0) {
        throw UsageError("crop multiple must be positive");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw UsageError("threshold must lie in [0, 1]");
    }
    if (jobs == 0) {
        throw UsageError("jobs must be at least 1");
    }
    if (!(grid_intensity >= 0.0)) {
        throw UsageError("grid intensity must be non-negative");
    }
    VolumeBins{bin_edges};
    if (input.empty()) {
        phantom.validate();
    } else {
        require_exists(input);
    }
    std::set<std::string> labels;
    for (const auto& [label, path] : train_logs) {
        if (!labels.insert(label).second) {
            throw UsageError("training log label " + label + " given twice");
        }
        require_exists(path);
    }
}

Json config_to_json(const PipelineConfig& c) {
    Json approaches = Json::array();
    for (Approach a : c.approaches) approaches.push_back(std::string(to_string(a)));
    Json logs = Json::object();
    for (const auto& [label, path] : c.train_logs) logs[label] = path.generic_string();
    Json j{{"input", c.input.empty() ? Json(nullptr) : Json(c.input.generic_string())},
           {"out", c.out.generic_string()},
           {"approaches", approaches},
           {"seed", c.seed},
           {"multiple", c.multiple},
           {"chest_side", std::string(to_string(c.chest_side))},
           {"threshold", c.threshold},
           {"bins_mm3", c.bin_edges},
           {"plots", c.plots},
           {"normalize", c.normalize},
           {"jobs", c.jobs},
           {"grid_intensity", c.grid_intensity},
           {"train_logs", logs}};
    if (c.input.empty()) {
        const PhantomSpec& p = c.phantom;
        j["phantom"] = {{"patients", p.patients},
                        {"shape", p.shape},
                        {"depth_min", p.depth_min},
                        {"spacing", p.spacing},
                        {"lesions", {p.lesions.lo, p.lesions.hi}},
                        {"lesion_radius_mm", {p.lesion_radius_mm.lo, p.lesion_radius_mm.hi}},
                        {"heart", p.heart},
                        {"seed", p.seed}};
    }
    return j;
}

Json run_pipeline(const PipelineConfig& config) {
    config.validate();
    std::error_code ec;
    fs::create_directories(config.out, ec);
    if (!fs::is_directory(config.out)) {
        throw DataError(config.out.string() + ": cannot create output directory");
    }
    const Json echo = config_to_json(config);

    CohortInput input;
    if (config.input.empty()) {
        const fs::path source_dir = config.out / "source";
        generate_cohort(config.phantom, source_dir, config.jobs);
        input = open_cohort(source_dir / "manifest.json");
    } else {
        input = open_cohort(config.input);
    }

    PrepOptions prep;
    prep.approaches = config.approaches;
    prep.seed = config.seed;
    prep.multiple = config.multiple;
    prep.chest_side = config.chest_side;
    prep.normalize = config.normalize;
    prep.jobs = config.jobs;
    const PrepResult prepared = prepare_cohort(input, prep, config.out);

    const VolumeBins bins(config.bin_edges);
    const auto budget = pixel_budget(prepared.manifests);

    Json datasets = Json::array();
    Json segmentation = Json::array();
    Json components = Json::array();
    for (std::size_t k = 0; k < prepared.manifests.size(); ++k) {
        const CohortManifest& m = prepared.manifests[k];
        const std::string name(to_string(m.approach));
        const fs::path dir = config.out / name;

        const ManifestAnalysis analysis = analyze_manifest(m, config.jobs);
        Json analysis_doc = analysis_to_json(analysis, true);
        analysis_doc["config"] = echo;
        write_report(analysis_doc, dir / "analysis.json");
        if (config.plots) {
            plots::write_analysis_plots(analysis.overlay, dir / "plots", name);
        }

        write_enhancement_baseline(m, dir / "baseline", config.jobs);
        const EvaluationRun run =
            evaluate_predictions(dir / "baseline", dir / "manifest.json", config.threshold, bins,
                                 config.jobs);
        Json metrics_doc = evaluation_to_json(run, config.threshold, bins);
        metrics_doc["config"] = echo;
        write_report(metrics_doc, dir / "metrics.json");

        const BudgetEntry& b = budget[k];
        datasets.push_back(
            {{"approach", name},
             {"shape", b.shape},
             {"patients", m.patients.size()},
             {"excluded", m.excluded},
             {"voxels_per_patient", b.voxels_per_patient},
             {"voxel_ratio", b.voxel_ratio ? Json(*b.voxel_ratio) : Json(nullptr)},
             {"slice_ratio", b.slice_ratio ? Json(*b.slice_ratio) : Json(nullptr)},
             {"h_max_mid", analysis.midline.h_max_mid},
             {"manifest", name + "/manifest.json"}});
        const auto& s = run.summary;
        segmentation.push_back({{"approach", name},
                                {"cases", s.cases},
                                {"dice", s.dice_avg},
                                {"iou", s.iou_avg},
                                {"precision", s.precision_avg},
                                {"recall", s.recall_avg}});
        const Json& lc = metrics_doc["lesion_components"];
        components.push_back({{"approach", name},
                              {"fp_by_bin", lc["fp_by_bin"]},
                              {"fn_by_bin", lc["fn_by_bin"]},
                              {"fp_total", lc["fp_total"]},
                              {"fn_total", lc["fn_total"]}});
    }

    Json energy = nullptr;
    if (!config.train_logs.empty()) {
        std::vector<LabeledLog> logs;
        for (const auto& [label, path] : config.train_logs) {
            logs.push_back({label, ingest_training_log(path, config.grid_intensity)});
        }
        energy = footprint_to_json(summarize_energy(logs), config.grid_intensity);
        Json energy_doc = energy;
        energy_doc["config"] = echo;
        write_report(energy_doc, config.out / "energy.json");
    }

    Json report;
    report["config"] = echo;
    report["cohort"] = {{"cohort_id", input.cohort_id},
                        {"patients", input.sources.size()},
                        {"excluded", input.excluded}};
    report["crop_plan"] = prepared.crop_plan ? Json(*prepared.crop_plan) : Json(nullptr);
    report["datasets"] = datasets;
    report["segmentation_metrics"] = segmentation;
    report["lesion_components"] = components;
    report["energy"] = energy;
    report["predictor"] =
        "enhancement baseline: subtraction image rescaled to [0, 1] per volume; score trained "
        "models with the evaluate subcommand";
    write_report(report, config.out / "report.json");
    return report;
}

}  // namespace roiforge
