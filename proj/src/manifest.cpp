#include "roiforge/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "roiforge/serialization.hpp"

namespace fs = std::filesystem;

namespace roiforge {

std::string_view to_string(Approach approach) {
    switch (approach) {
        case Approach::Source: return "SOURCE";
        case Approach::WvRaw: return "WV_RAW";
        case Approach::BrsWv: return "BRS_WV";
        case Approach::BrsSls: return "BRS_SLS";
        case Approach::BrsOv: return "BRS_OV";
    }
    return "UNKNOWN";
}

Approach parse_approach(std::string_view text) {
    for (Approach a : {Approach::Source, Approach::WvRaw, Approach::BrsWv, Approach::BrsSls,
                       Approach::BrsOv}) {
        if (text == to_string(a)) {
            return a;
        }
    }
    throw UsageError("unknown approach '" + std::string(text) +
                     "' (expected WV_RAW, BRS_WV, BRS_SLS or BRS_OV)");
}

void to_json(Json& j, const Shape& shape) {
    j = Json::array({shape.width, shape.height, shape.depth});
}

void from_json(const Json& j, Shape& shape) {
    if (!j.is_array() || j.size() != 3) {
        throw DataError("shape must be a 3-element array");
    }
    shape = Shape{j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

void to_json(Json& j, const Spacing& spacing) {
    j = Json::array({spacing.x, spacing.y, spacing.z});
}

void from_json(const Json& j, Spacing& spacing) {
    if (!j.is_array() || j.size() != 3) {
        throw DataError("spacing must be a 3-element array");
    }
    spacing = Spacing{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void to_json(Json& j, const CropPlan& plan) {
    j = Json{{"required_height", plan.required_height},
             {"crop_height", plan.crop_height},
             {"multiple", plan.multiple},
             {"safe_distance_px", plan.safe_distance_px},
             {"safe_distance_mm", plan.safe_distance_mm},
             {"image_height", plan.image_height},
             {"y_spacing", plan.y_spacing},
             {"chest_side", to_string(plan.chest_side)},
             {"anchor", "chest_line_extending_anteriorly"},
             {"crop_width", plan.crop_width},
             {"crop_depth", plan.crop_depth}};
}

void from_json(const Json& j, CropPlan& plan) {
    plan.required_height = j.at("required_height").get<std::size_t>();
    plan.crop_height = j.at("crop_height").get<std::size_t>();
    plan.multiple = j.at("multiple").get<std::size_t>();
    plan.safe_distance_px = j.at("safe_distance_px").get<std::size_t>();
    plan.safe_distance_mm = j.at("safe_distance_mm").get<double>();
    plan.image_height = j.at("image_height").get<std::size_t>();
    plan.y_spacing = j.at("y_spacing").get<double>();
    plan.chest_side = parse_chest_side(j.at("chest_side").get<std::string>());
    plan.crop_width = j.at("crop_width").get<std::size_t>();
    plan.crop_depth = j.at("crop_depth").get<std::size_t>();
}

void to_json(Json& j, const CropWindow& window) {
    j = Json{{"y_start", window.y_start},
             {"height", window.height},
             {"chest_line", window.chest_line}};
}

void from_json(const Json& j, CropWindow& window) {
    window.y_start = j.at("y_start").get<std::size_t>();
    window.height = j.at("height").get<std::size_t>();
    window.chest_line = j.at("chest_line").get<std::size_t>();
}

void to_json(Json& j, const OversampleMap& map) {
    j = Json{{"target_depth", map.target_depth}, {"source_slices", map.source_slices}};
}

void from_json(const Json& j, OversampleMap& map) {
    map.target_depth = j.at("target_depth").get<std::size_t>();
    map.source_slices = j.at("source_slices").get<std::vector<std::size_t>>();
}

void to_json(Json& j, const Exclusion& exclusion) {
    j = Json{{"id", exclusion.id}, {"reason", exclusion.reason}};
}

void from_json(const Json& j, Exclusion& exclusion) {
    exclusion.id = j.at("id").get<std::string>();
    exclusion.reason = j.at("reason").get<std::string>();
}

Json extent_summary(const ExtentReport& report) {
    return Json{{"patient", report.patient_id},
                {"y_min", report.y_min},
                {"y_max", report.y_max},
                {"chest_line", report.chest_line},
                {"required_height", report.required_height}};
}

namespace {

Json path_json(const fs::path& p) {
    return p.empty() ? Json(nullptr) : Json(p.generic_string());
}

fs::path path_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return {};
    }
    return fs::path(j.at(key).get<std::string>());
}

Json entry_to_json(const ManifestEntry& e) {
    Json files{{"pre_contrast", path_json(e.files.pre_contrast)},
               {"first_post_contrast", path_json(e.files.first_post_contrast)},
               {"subtraction", path_json(e.files.subtraction)},
               {"region_mask", path_json(e.files.region_mask)},
               {"lesion_mask", path_json(e.files.lesion_mask)}};
    Json j{{"id", e.id}, {"files", files}, {"shape", e.shape}, {"spacing", e.spacing}};
    j["oversample_map"] = e.oversample ? Json(*e.oversample) : Json(nullptr);
    j["selected_slices"] = e.selected_slices ? Json(*e.selected_slices) : Json(nullptr);
    j["crop"] = e.crop ? Json(*e.crop) : Json(nullptr);
    return j;
}

ManifestEntry entry_from_json(const Json& j) {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    const Json& files = j.at("files");
    e.files.pre_contrast = path_from(files, "pre_contrast");
    e.files.first_post_contrast = path_from(files, "first_post_contrast");
    e.files.subtraction = path_from(files, "subtraction");
    e.files.region_mask = path_from(files, "region_mask");
    e.files.lesion_mask = path_from(files, "lesion_mask");
    e.shape = j.at("shape").get<Shape>();
    e.spacing = j.at("spacing").get<Spacing>();
    if (j.contains("oversample_map") && !j["oversample_map"].is_null()) {
        e.oversample = j["oversample_map"].get<OversampleMap>();
    }
    if (j.contains("selected_slices") && !j["selected_slices"].is_null()) {
        e.selected_slices = j["selected_slices"].get<std::vector<std::size_t>>();
    }
    if (j.contains("crop") && !j["crop"].is_null()) {
        e.crop = j["crop"].get<CropWindow>();
    }
    return e;
}

}  // namespace

fs::path CohortManifest::resolve(const fs::path& p) const {
    if (p.empty() || p.is_absolute()) {
        return p;
    }
    return base_dir / p;
}

const ManifestEntry& CohortManifest::find(std::string_view id) const {
    for (const auto& e : patients) {
        if (e.id == id) {
            return e;
        }
    }
    throw DataError("patient '" + std::string(id) + "' not in manifest " + cohort_id);
}

std::string manifest_to_json(const CohortManifest& m) {
    Json j;
    j["schema_version"] = m.schema_version;
    j["cohort_id"] = m.cohort_id;
    j["approach"] = to_string(m.approach);
    j["seed"] = m.seed;
    j["normalization"] = m.normalization;
    j["crop_plan"] = m.crop_plan ? Json(*m.crop_plan) : Json(nullptr);
    Json patients = Json::array();
    for (const auto& e : m.patients) {
        patients.push_back(entry_to_json(e));
    }
    j["patients"] = std::move(patients);
    j["excluded"] = m.excluded;
    if (!m.patients.empty() && m.approach != Approach::Source) {
        j["shape"] = m.patients.front().shape;
    }
    return j.dump(2) + "\n";
}

CohortManifest manifest_from_json(std::string_view text, const std::string& origin) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw DataError(origin + ": invalid JSON: " + e.what());
    }
    try {
        CohortManifest m;
        if (!j.contains("schema_version")) {
            throw DataError(origin + ": missing schema_version");
        }
        m.schema_version = j.at("schema_version").get<int>();
        if (m.schema_version != kManifestSchemaVersion) {
            throw DataError(origin + ": unsupported schema_version " +
                            std::to_string(m.schema_version));
        }
        m.cohort_id = j.at("cohort_id").get<std::string>();
        try {
            m.approach = parse_approach(j.at("approach").get<std::string>());
        } catch (const UsageError& e) {
            throw DataError(origin + ": " + e.what());
        }
        m.seed = j.value("seed", std::uint64_t{0});
        m.normalization = j.value("normalization", std::string("none"));
        if (j.contains("crop_plan") && !j["crop_plan"].is_null()) {
            m.crop_plan = j["crop_plan"].get<CropPlan>();
        }
        for (const auto& p : j.at("patients")) {
            m.patients.push_back(entry_from_json(p));
        }
        if (j.contains("excluded")) {
            m.excluded = j["excluded"].get<std::vector<Exclusion>>();
        }
        return m;
    } catch (const Json::exception& e) {
        throw DataError(origin + ": malformed manifest: " + e.what());
    } catch (const UsageError& e) {
        throw DataError(origin + ": " + e.what());
    }
}

CohortManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path.string() + ": file not found");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    CohortManifest m = manifest_from_json(buffer.str(), path.string());
    m.base_dir = path.parent_path();
    return m;
}

void write_manifest(const CohortManifest& manifest, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError(path.string() + ": cannot open for writing");
    }
    out << manifest_to_json(manifest);
    if (!out) {
        throw DataError(path.string() + ": write failed");
    }
}

void validate_manifest(const CohortManifest& m) {
    std::set<std::string> ids;
    for (const auto& e : m.patients) {
        if (!ids.insert(e.id).second) {
            throw DataError("manifest " + m.cohort_id + ": duplicate patient id " + e.id);
        }
        for (const fs::path* p : {&e.files.pre_contrast, &e.files.first_post_contrast,
                                  &e.files.subtraction, &e.files.region_mask,
                                  &e.files.lesion_mask}) {
            if (p->empty()) {
                continue;
            }
            std::error_code ec;
            const fs::path full = m.resolve(*p);
            if (!fs::is_regular_file(full, ec)) {
                throw DataError(full.string() + ": file not found (patient " + e.id + ")");
            }
        }
        if (m.approach != Approach::Source && !(e.shape == m.patients.front().shape)) {
            throw DataError("manifest " + m.cohort_id + ": patient " + e.id + " has shape " +
                            to_string(e.shape) + ", expected " +
                            to_string(m.patients.front().shape));
        }
    }
}

}  // namespace roiforge
