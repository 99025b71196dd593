#include "roiforge/sustainability.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <tuple>

#include "json.hpp"
#include "roiforge/error.hpp"

namespace roiforge {

double carbon_footprint(double tt_seconds, double grid_intensity) {
    if (!(tt_seconds >= 0.0) || !std::isfinite(tt_seconds)) {
        throw DataError("training time must be a non-negative number of seconds");
    }
    return grid_intensity * tt_seconds / 3600.0;
}

double normalized_cfp(double cfp, double cfp_max, double cfp_min) {
    if (cfp_max == 0.0) {
        throw DataError("CFP_max must be positive");
    }
    constexpr double kTol = 1e-12;
    if (cfp_min < 0.0 || cfp_min > cfp_max || cfp < cfp_min - kTol || cfp > cfp_max + kTol) {
        throw DataError("CFP " + std::to_string(cfp) + " outside [" + std::to_string(cfp_min) +
                        ", " + std::to_string(cfp_max) + "]");
    }
    return 1.0 - (cfp_max - cfp_min) * (cfp / cfp_max);
}

double minmax_cfp(double cfp, double cfp_max, double cfp_min) {
    if (cfp_max == cfp_min) {
        return 1.0;
    }
    return (cfp_max - cfp) / (cfp_max - cfp_min);
}

std::vector<EnergyRecord> parse_training_log(std::istream& in, const std::string& origin,
                                             double grid_intensity) {
    std::vector<EnergyRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
            continue;
        }
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw DataError(where + "malformed JSON");
        }
        try {
            EnergyRecord r;
            r.fold = j.at("fold").get<int>();
            r.tt_seconds = j.at("tt_seconds").get<double>();
            if (r.tt_seconds < 0.0) {
                throw DataError(where + "negative tt_seconds");
            }
            r.epochs = j.value("epochs", 0);
            if (j.contains("best_epoch") && !j["best_epoch"].is_null()) {
                r.best_epoch = j["best_epoch"].get<int>();
            }
            r.cfp = carbon_footprint(r.tt_seconds, grid_intensity);
            records.push_back(r);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + "bad field: " + e.what());
        }
    }
    if (!records.empty()) {
        const auto [lo, hi] = std::minmax_element(
            records.begin(), records.end(),
            [](const EnergyRecord& a, const EnergyRecord& b) { return a.cfp < b.cfp; });
        const double cfp_min = lo->cfp;
        const double cfp_max = hi->cfp;
        for (auto& r : records) {
            r.norm_cfp = cfp_max > 0.0 ? normalized_cfp(r.cfp, cfp_max, cfp_min) : 1.0;
        }
    }
    return records;
}

std::vector<EnergyRecord> ingest_training_log(const std::filesystem::path& path,
                                              double grid_intensity) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path.string() + ": file not found");
    }
    return parse_training_log(in, path.string(), grid_intensity);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) {
        return {0.0, 0.0};
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace

std::vector<EnergySummary> summarize_energy(std::span<const LabeledLog> logs) {
    std::vector<EnergySummary> out;
    for (const auto& log : logs) {
        EnergySummary s;
        s.label = log.label;
        s.folds = log.records;
        std::vector<double> minutes, cfps, epochs;
        for (const auto& r : log.records) {
            minutes.push_back(r.tt_seconds / 60.0);
            cfps.push_back(r.cfp);
            epochs.push_back(static_cast<double>(r.epochs));
        }
        std::tie(s.tt_minutes_mean, s.tt_minutes_std) = mean_std(minutes);
        std::tie(s.cfp_mean, s.cfp_std) = mean_std(cfps);
        std::tie(s.epochs_mean, s.epochs_std) = mean_std(epochs);
        out.push_back(std::move(s));
    }
    if (!out.empty()) {
        const auto [lo, hi] = std::minmax_element(
            out.begin(), out.end(),
            [](const EnergySummary& a, const EnergySummary& b) { return a.cfp_mean < b.cfp_mean; });
        const double cfp_min = lo->cfp_mean;
        const double cfp_max = hi->cfp_mean;
        for (auto& s : out) {
            s.norm_cfp = cfp_max > 0.0 ? normalized_cfp(s.cfp_mean, cfp_max, cfp_min) : 1.0;
            s.minmax_cfp = minmax_cfp(s.cfp_mean, cfp_max, cfp_min);
        }
    }
    return out;
}

}  // namespace roiforge
