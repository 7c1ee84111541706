#pragma once

#include <string>

#include "gatets/model.hpp"
#include "gatets/trainer.hpp"
#include "json.hpp"

namespace gatets {

nlohmann::ordered_json to_json(const GateTSConfig& config);
nlohmann::ordered_json to_json(const TrainConfig& config);

// Strict parsers: unknown keys raise ConfigError listing the valid set.
GateTSConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Applies a "key=value" override onto either config; unknown keys raise
// ConfigError listing the valid keys.
void apply_override(GateTSConfig* model_config, TrainConfig* train_config,
                    const std::string& assignment);

}  // namespace gatets
