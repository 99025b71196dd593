#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace roiforge {

/// kg CO2 per kWh.
inline constexpr double kDefaultGridIntensity = 0.475;

/// Carbon footprint in kg CO2 of a training run lasting tt_seconds.
double carbon_footprint(double tt_seconds, double grid_intensity = kDefaultGridIntensity);

/// 1 - (cfp_max - cfp_min) * (cfp / cfp_max). Can go negative when the
/// cohort range exceeds 1 kg.
double normalized_cfp(double cfp, double cfp_max, double cfp_min);

/// Conventional (cfp_max - cfp) / (cfp_max - cfp_min), 1 for a zero range.
/// Reported alongside normalized_cfp for readability.
double minmax_cfp(double cfp, double cfp_max, double cfp_min);

struct EnergyRecord {
    int fold = 0;
    double tt_seconds = 0.0;
    double cfp = 0.0;
    double norm_cfp = 1.0;
    int epochs = 0;
    std::optional<int> best_epoch;
};

/// Parses the trainer's JSON-lines timing log, one object per fold:
/// {"fold": 0, "tt_seconds": 812.4, "epochs": 31, "best_epoch": 24}.
/// Blank lines are skipped. Norm_CFP is taken over the folds of this log.
std::vector<EnergyRecord> parse_training_log(std::istream& in, const std::string& origin,
                                             double grid_intensity = kDefaultGridIntensity);

std::vector<EnergyRecord> ingest_training_log(const std::filesystem::path& path,
                                              double grid_intensity = kDefaultGridIntensity);

struct EnergySummary {
    std::string label;
    std::vector<EnergyRecord> folds;
    double tt_minutes_mean = 0.0;
    double tt_minutes_std = 0.0;
    double cfp_mean = 0.0;
    double cfp_std = 0.0;
    double epochs_mean = 0.0;
    double epochs_std = 0.0;
    /// Over the group means of every summary passed together.
    double norm_cfp = 1.0;
    double minmax_cfp = 1.0;
};

struct LabeledLog {
    std::string label;
    std::vector<EnergyRecord> records;
};

/// Mean and sample standard deviation per group; group-level Norm_CFP uses
/// the max/min of the group mean CFPs.
std::vector<EnergySummary> summarize_energy(std::span<const LabeledLog> logs);

}  // namespace roiforge
