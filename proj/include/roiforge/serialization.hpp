#pragma once

// JSON conversions for the value types that appear in manifests and
// reports. Found through ADL by nlohmann::json.

#include "json.hpp"
#include "roiforge/manifest.hpp"
#include "roiforge/roi_optimizer.hpp"
#include "roiforge/volume.hpp"

namespace roiforge {

using Json = nlohmann::json;

void to_json(Json& j, const Shape& shape);
void from_json(const Json& j, Shape& shape);

void to_json(Json& j, const Spacing& spacing);
void from_json(const Json& j, Spacing& spacing);

void to_json(Json& j, const CropPlan& plan);
void from_json(const Json& j, CropPlan& plan);

void to_json(Json& j, const CropWindow& window);
void from_json(const Json& j, CropWindow& window);

void to_json(Json& j, const OversampleMap& map);
void from_json(const Json& j, OversampleMap& map);

void to_json(Json& j, const Exclusion& exclusion);
void from_json(const Json& j, Exclusion& exclusion);

/// Compact form of an extent report (per-slice rows omitted).
Json extent_summary(const ExtentReport& report);

}  // namespace roiforge
