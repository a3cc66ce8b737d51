#pragma once

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "llmctl/arx.hpp"
#include "llmctl/costa.hpp"
#include "llmctl/lstm_predictor.hpp"

namespace llmctl {

inline constexpr int kCheckpointVersion = 1;

/// JSON weight files: {"format": "llmctl-predictor", "version", "kind",
/// "config", "scaler", "params"}.
nlohmann::json arx_to_json(const ArxModel& model);
nlohmann::json lstm_to_json(const LstmPredictor& model);
nlohmann::json costa_to_json(const CostaModel& model);

std::shared_ptr<Predictor> predictor_from_json(const nlohmann::json& j);

void save_checkpoint(const nlohmann::json& j, const std::filesystem::path& path);
std::shared_ptr<Predictor> load_checkpoint(const std::filesystem::path& path);

}  // namespace llmctl
