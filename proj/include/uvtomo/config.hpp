#pragma once

#include <json.hpp>

#include "uvtomo/baselines.hpp"
#include "uvtomo/trainer.hpp"

namespace uvtomo {

// JSON field names mirror the struct members. Unknown keys are rejected so
// typos do not silently fall back to defaults.
void from_json(const nlohmann::json& j, TrainConfig& cfg);
void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, AdmmConfig& cfg);
void to_json(nlohmann::json& j, const AdmmConfig& cfg);
void from_json(const nlohmann::json& j, EmConfig& cfg);
void to_json(nlohmann::json& j, const EmConfig& cfg);

}  // namespace uvtomo
