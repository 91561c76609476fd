#pragma once

#include "ctiaug/trainer.hpp"
#include "json.hpp"

namespace ctiaug {

nlohmann::json train_config_to_json(const TrainConfig& cfg);

}  // namespace ctiaug
