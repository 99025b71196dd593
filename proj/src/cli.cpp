#include "roiforge/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <sstream>

#include "roiforge/error.hpp"
#include "roiforge/pipeline.hpp"
#include "roiforge/plots.hpp"

namespace fs = std::filesystem;

namespace roiforge {

namespace {

const std::vector<std::string> kSubcommands = {"phantom",  "prep",      "optimize", "analyze",
                                               "evaluate", "footprint", "pipeline"};

// Reads a JSON object as CLI11 config items. Top-level keys address the
// running subcommand's options; an object keyed by the subcommand name is
// read the same way, and objects keyed by other subcommand names are
// skipped so that one document can configure several stages.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(std::string section) : section_(std::move(section)) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override {
        return "{}\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        Json doc;
        try {
            doc = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw CLI::ConversionError("config document is not valid JSON: " + std::string(e.what()));
        }
        if (!doc.is_object()) {
            throw CLI::ConversionError("config document must be a JSON object");
        }
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : doc.items()) {
            if (value.is_object()) {
                if (key == section_) {
                    for (const auto& [k, v] : value.items()) add(items, k, v);
                } else if (std::find(kSubcommands.begin(), kSubcommands.end(), key) ==
                           kSubcommands.end()) {
                    throw CLI::ConversionError("config key '" + key +
                                               "' holds an object but is not a subcommand");
                }
                continue;
            }
            add(items, key, value);
        }
        return items;
    }

private:
    static std::string scalar(const Json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConversionError("config values must be strings, numbers, booleans or arrays");
    }

    void add(std::vector<CLI::ConfigItem>& items, const std::string& key, const Json& v) const {
        if (v.is_null()) {
            return;
        }
        CLI::ConfigItem item;
        item.parents = {section_};
        item.name = key;
        if (v.is_array()) {
            for (const auto& e : v) item.inputs.push_back(scalar(e));
        } else {
            item.inputs.push_back(scalar(v));
        }
        items.push_back(std::move(item));
    }

    std::string section_;
};

// ---- value parsing ----

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw UsageError("invalid " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, std::string_view sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + sep.size();
    }
    return parts;
}

Shape parse_shape(const std::string& text) {
    const auto parts = split(text, "x");
    if (parts.size() != 3) {
        throw UsageError("shape must look like 64x64x20, got '" + text + "'");
    }
    return {parse_number<std::size_t>(parts[0], "shape"), parse_number<std::size_t>(parts[1], "shape"),
            parse_number<std::size_t>(parts[2], "shape")};
}

Spacing parse_spacing(const std::string& text) {
    const auto parts = split(text, ",");
    if (parts.size() != 3) {
        throw UsageError("spacing must look like 1,1,2, got '" + text + "'");
    }
    return {parse_number<double>(parts[0], "spacing"), parse_number<double>(parts[1], "spacing"),
            parse_number<double>(parts[2], "spacing")};
}

template <typename T>
Range<T> parse_range(const std::string& text, std::string_view what) {
    const auto parts = split(text, "..");
    if (parts.size() == 1) {
        const T v = parse_number<T>(parts[0], what);
        return {v, v};
    }
    if (parts.size() != 2) {
        throw UsageError(std::string(what) + " must look like LO..HI, got '" + text + "'");
    }
    return {parse_number<T>(parts[0], what), parse_number<T>(parts[1], what)};
}

std::vector<double> parse_edges(const std::string& text) {
    std::vector<double> edges;
    if (text.empty() || text == "none") {
        return edges;
    }
    for (auto part : split(text, ",")) edges.push_back(parse_number<double>(part, "bin edge"));
    return edges;
}

std::vector<Approach> parse_approaches(const std::vector<std::string>& names) {
    if (names.empty() || (names.size() == 1 && names.front() == "all")) {
        return {std::begin(kAllApproaches), std::end(kAllApproaches)};
    }
    std::vector<Approach> out;
    for (const auto& n : names) {
        for (auto part : split(n, ",")) out.push_back(parse_approach(part));
    }
    return out;
}

// Every option of a subcommand as it ended up after command line and config
// file were applied; embedded in reports for provenance.
Json option_echo(const CLI::App& sub) {
    Json j = Json::object();
    j["subcommand"] = sub.get_name();
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") {
            continue;
        }
        std::vector<std::string> values = opt->count() > 0 ? opt->results()
                                                           : std::vector<std::string>{};
        if (values.empty() && !opt->get_default_str().empty()) {
            values.push_back(opt->get_default_str());
        }
        if (opt->get_expected_max() > 1) {
            j[name] = values;
        } else if (!values.empty()) {
            j[name] = values.back();
        } else {
            j[name] = nullptr;
        }
    }
    return j;
}

// CLI11 only reads the config file of the top-level app, so the option lives
// there and its items are routed to the subcommand named on the command line.
void attach_config(CLI::App& app, int argc, const char* const* argv) {
    std::string section;
    for (int i = 1; i < argc && section.empty(); ++i) {
        if (std::find(kSubcommands.begin(), kSubcommands.end(), argv[i]) != kSubcommands.end()) {
            section = argv[i];
        }
    }
    app.config_formatter(std::make_shared<JsonConfig>(section));
    app.set_config("--config", "", "JSON document with option values");
    app.allow_config_extras(false);
}

struct PhantomArgs {
    std::size_t patients = 8;
    std::string shape = "64x64x20";
    std::size_t depth_min = 0;
    std::string spacing = "1,1,2";
    std::string lesions = "1..3";
    std::string lesion_radius = "2..4";
    double contrast = 200.0;
    bool no_heart = false;

    void add_to(CLI::App* sub) {
        sub->add_option("--patients", patients, "Number of patients")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        sub->add_option("--shape", shape, "Grid size WxHxD")->capture_default_str();
        sub->add_option("--depth-min", depth_min,
                        "Smallest per-patient depth; 0 gives every patient the full depth")
            ->capture_default_str();
        sub->add_option("--spacing", spacing, "Voxel spacing in mm, x,y,z")->capture_default_str();
        sub->add_option("--lesions", lesions, "Lesions per patient, LO..HI")->capture_default_str();
        sub->add_option("--lesion-radius", lesion_radius, "Lesion radius in mm, LO..HI")
            ->capture_default_str();
        sub->add_option("--contrast", contrast, "Lesion enhancement")->capture_default_str();
        sub->add_flag("--no-heart", no_heart, "Omit the enhancing structure behind the chest line");
    }

    [[nodiscard]] PhantomSpec spec(std::uint64_t seed) const {
        PhantomSpec s;
        s.patients = patients;
        s.shape = parse_shape(shape);
        s.depth_min = depth_min;
        s.spacing = parse_spacing(spacing);
        s.lesions = parse_range<std::size_t>(lesions, "lesion count");
        s.lesion_radius_mm = parse_range<double>(lesion_radius, "lesion radius");
        s.contrast = contrast;
        s.heart = !no_heart;
        s.seed = seed;
        s.validate();
        return s;
    }
};

void add_jobs(CLI::App* sub, std::size_t& jobs) {
    sub->add_option("--jobs", jobs, "Worker threads for per-patient work")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

void add_chest_side(CLI::App* sub, std::string& side) {
    sub->add_option("--chest-side", side,
                    "Image side holding the chest wall: high (posterior at large row index) or low")
        ->capture_default_str();
}

int fail(std::ostream& err, int code, const std::string& message) {
    err << "roiforge: " << message << "\n";
    return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"roiforge: breast MRI dataset preparation, region-of-interest cropping and "
                 "evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    attach_config(app, argc, argv);

    std::size_t jobs = 1;
    std::uint64_t seed = 7;
    std::size_t multiple = 32;
    std::string chest_side = "high";
    std::string out_path;
    std::string input;
    std::vector<std::string> approaches;
    bool no_normalize = false;

    // phantom
    PhantomArgs phantom_args;
    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic cohort with ground truth");
    phantom_args.add_to(phantom);
    phantom->add_option("--seed", seed, "Master seed")->capture_default_str();
    phantom->add_option("--out", out_path, "Output directory")->required();
    add_jobs(phantom, jobs);

    // prep
    auto* prep = app.add_subcommand("prep", "Assemble dataset variants from a cohort");
    prep->add_option("--input", input,
                     "Cohort manifest, directory with manifest.json, or directory of series")
        ->required();
    prep->add_option("--approach", approaches,
                     "WV_RAW, BRS_WV, BRS_SLS, BRS_OV or all (repeatable)");
    prep->add_option("--seed", seed, "Oversampling seed")->capture_default_str();
    prep->add_option("--multiple", multiple, "Crop height multiple")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_chest_side(prep, chest_side);
    prep->add_flag("--no-normalize", no_normalize, "Keep raw intensities");
    prep->add_option("--out", out_path, "Output directory; one subdirectory per approach")
        ->required();
    add_jobs(prep, jobs);

    // optimize
    std::string manifest_path;
    std::string report_path;
    auto* optimize =
        app.add_subcommand("optimize", "Plan the optimal-volume crop and write the cropped set");
    optimize->add_option("--manifest", manifest_path, "BRS_SLS manifest")->required();
    optimize->add_option("--multiple", multiple, "Crop height multiple")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_chest_side(optimize, chest_side);
    optimize->add_option("--out", out_path, "Output directory for the BRS_OV set")->required();
    optimize->add_option("--report", report_path, "Also write the crop plan JSON here");
    add_jobs(optimize, jobs);

    // analyze
    std::vector<std::string> manifests;
    std::string plots_dir;
    auto* analyze = app.add_subcommand("analyze", "Overlay maps, histograms and midline extent");
    analyze->add_option("--manifest", manifests, "Manifest (repeatable)")->required();
    analyze->add_option("--out", out_path, "Report JSON path")->required();
    analyze->add_option("--plots", plots_dir, "Directory for PNG figures");
    add_jobs(analyze, jobs);

    // evaluate
    std::string pred_dir;
    std::string gt_path;
    double threshold = 0.5;
    std::string bins_text = "10,20";
    auto* evaluate = app.add_subcommand("evaluate", "Score probability volumes against labels");
    evaluate->add_option("--pred", pred_dir, "Directory of probability volumes")->required();
    evaluate->add_option("--gt", gt_path, "Label directory or manifest")->required();
    evaluate->add_option("--threshold", threshold, "Binarisation threshold")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    evaluate->add_option("--bins", bins_text, "Component volume bin edges in mm3, comma separated")
        ->capture_default_str();
    evaluate->add_option("--out", out_path, "Metrics JSON path")->required();
    add_jobs(evaluate, jobs);

    // footprint
    std::vector<std::string> logs;
    double grid_intensity = kDefaultGridIntensity;
    auto* footprint = app.add_subcommand("footprint", "Carbon footprint of training runs");
    footprint->add_option("--log", logs, "Timing log, optionally LABEL=path (repeatable)")
        ->required();
    footprint->add_option("--grid-intensity", grid_intensity, "kg CO2 per kWh")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    footprint->add_option("--out", out_path, "Energy report JSON path")->required();

    // pipeline
    PhantomArgs pipeline_phantom;
    bool plots = false;
    std::vector<std::string> train_logs;
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage and write a comparison report");
    pipeline->add_option("--input", input,
                         "Cohort input; a phantom cohort is generated when omitted");
    pipeline->add_option("--out", out_path, "Output directory")->required();
    pipeline->add_option("--approach", approaches, "Approaches to build (default all)");
    pipeline->add_option("--seed", seed, "Master seed")->capture_default_str();
    pipeline->add_option("--multiple", multiple, "Crop height multiple")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_chest_side(pipeline, chest_side);
    pipeline->add_option("--threshold", threshold, "Binarisation threshold")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    pipeline->add_option("--bins", bins_text, "Component volume bin edges in mm3")
        ->capture_default_str();
    pipeline->add_flag("--plots", plots, "Render PNG figures next to each analysis");
    pipeline->add_flag("--no-normalize", no_normalize, "Keep raw intensities");
    pipeline->add_option("--train-log", train_logs, "Trainer timing log as LABEL=path (repeatable)");
    pipeline->add_option("--grid-intensity", grid_intensity, "kg CO2 per kWh")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    pipeline_phantom.add_to(pipeline);
    add_jobs(pipeline, jobs);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "roiforge: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (phantom->parsed()) {
            const PhantomSpec spec = phantom_args.spec(seed);
            const CohortManifest m = generate_cohort(spec, out_path, jobs);
            out << dump_report({{"manifest", (fs::path(out_path) / "manifest.json").generic_string()},
                                {"patients", m.patients.size()},
                                {"config", option_echo(*phantom)}});
        } else if (prep->parsed()) {
            PrepOptions options;
            options.approaches = parse_approaches(approaches);
            options.seed = seed;
            options.multiple = multiple;
            options.chest_side = parse_chest_side(chest_side);
            options.normalize = !no_normalize;
            options.jobs = jobs;
            const CohortInput cohort = open_cohort(input);
            const PrepResult result = prepare_cohort(cohort, options, out_path);
            Json summary;
            summary["config"] = option_echo(*prep);
            summary["crop_plan"] = result.crop_plan ? Json(*result.crop_plan) : Json(nullptr);
            for (const auto& m : result.manifests) {
                summary["manifests"][std::string(to_string(m.approach))] = {
                    {"path", (m.base_dir / "manifest.json").generic_string()},
                    {"patients", m.patients.size()},
                    {"excluded", m.excluded},
                    {"shape", m.patients.empty() ? Json(nullptr) : Json(m.patients.front().shape)}};
            }
            out << dump_report(summary);
        } else if (optimize->parsed()) {
            const CohortManifest sls = read_manifest(manifest_path);
            std::error_code ec;
            if (fs::exists(out_path) && fs::equivalent(out_path, sls.base_dir, ec)) {
                throw UsageError("--out must differ from the input manifest's directory");
            }
            const CohortManifest ov =
                optimize_manifest(sls, multiple, parse_chest_side(chest_side), out_path, jobs);
            Json summary{{"config", option_echo(*optimize)},
                         {"crop_plan", *ov.crop_plan},
                         {"manifest", (fs::path(out_path) / "manifest.json").generic_string()}};
            if (!report_path.empty()) {
                write_report(summary, report_path);
            }
            out << dump_report(summary);
        } else if (analyze->parsed()) {
            std::vector<CohortManifest> loaded;
            for (const auto& p : manifests) loaded.push_back(read_manifest(p));
            Json report;
            report["config"] = option_echo(*analyze);
            report["analyses"] = Json::array();
            for (const auto& m : loaded) {
                const ManifestAnalysis a = analyze_manifest(m, jobs);
                report["analyses"].push_back(analysis_to_json(a, true));
                if (!plots_dir.empty()) {
                    plots::write_analysis_plots(a.overlay, plots_dir,
                                                std::string(to_string(a.approach)));
                }
            }
            report["pixel_budget"] = budget_to_json(pixel_budget(loaded));
            write_report(report, out_path);
        } else if (evaluate->parsed()) {
            const VolumeBins bins(parse_edges(bins_text));
            const EvaluationRun run = evaluate_predictions(pred_dir, gt_path, threshold, bins, jobs);
            Json report = evaluation_to_json(run, threshold, bins);
            report["config"] = option_echo(*evaluate);
            write_report(report, out_path);
        } else if (footprint->parsed()) {
            std::vector<LabeledLog> groups;
            for (const auto& text : logs) {
                auto [label, path] = parse_labeled_path(text);
                groups.push_back({label, ingest_training_log(path, grid_intensity)});
            }
            Json report = footprint_to_json(summarize_energy(groups), grid_intensity);
            report["config"] = option_echo(*footprint);
            write_report(report, out_path);
        } else if (pipeline->parsed()) {
            PipelineConfig config;
            config.input = input;
            config.out = out_path;
            config.approaches = parse_approaches(approaches);
            config.seed = seed;
            config.multiple = multiple;
            config.chest_side = parse_chest_side(chest_side);
            config.threshold = threshold;
            config.bin_edges = parse_edges(bins_text);
            config.plots = plots;
            config.normalize = !no_normalize;
            config.jobs = jobs;
            config.grid_intensity = grid_intensity;
            for (const auto& text : train_logs) config.train_logs.push_back(parse_labeled_path(text));
            if (input.empty()) {
                config.phantom = pipeline_phantom.spec(seed);
            }
            run_pipeline(config);
            out << (fs::path(out_path) / "report.json").generic_string() << "\n";
        }
    } catch (const UsageError& e) {
        err << "roiforge: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        return fail(err, kExitData, e.what());
    } catch (const std::exception& e) {
        return fail(err, kExitInternal, std::string("internal error: ") + e.what());
    }
    return kExitOk;
}

}  // namespace roiforge
