#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmctl/checkpoint.hpp"
#include "llmctl/evalreport.hpp"
#include "llmctl/looprunner.hpp"

namespace llmctl {

/// Settings for the whole pipeline, loadable from a JSON file:
/// {"plant": {"k_loss": 0.01, ...}, "dataset": {...}, "training": {...},
///  "backend": {...}, "mock": {...}, "run": {...}}. Missing keys keep
/// their defaults.
struct WorkspaceConfig {
  PlantConfig plant;
  int episodes = 15;
  int minutes = 212;
  std::uint64_t data_seed = 7;
  double test_fraction = 0.2;
  double val_fraction = 0.2;
  std::size_t lookback = 10;
  std::size_t arx_p = 10;
  std::size_t arx_q = 10;
  nn::TrainConfig lstm_train = lstm_train_defaults();
  nn::TrainConfig costa_train = costa_train_defaults();
  BackendConfig backend;
  MockPolicy mock;
  ReferenceSchedule schedule = ReferenceSchedule::standard();
  std::uint64_t run_seed = 1;
  int max_rounds = 6;
  bool guardrail = true;

  static WorkspaceConfig from_json(const nlohmann::json& j);
  static WorkspaceConfig load(const std::filesystem::path& path);
};

/// Id and start time of the guide run written by gen-data.
inline constexpr const char* kGuideController = "Reference control_guide";
std::string guide_experiment_id();
EpochSeconds guide_start_time();

/// Reference controller used for the guide run: steady-state feed-forward
/// on the truth model plus proportional feedback, fan only to shed excess heat.
ControlInput reference_control(double target, double T, double T_amb, const PlantParams& truth);

/// Runs the reference controller over a schedule on the truth plant.
std::vector<RunTick> simulate_guide_run(const PlantConfig& plant, const ReferenceSchedule& schedule,
                                        EpochSeconds start, std::uint64_t seed);

struct TrainedModels {
  std::shared_ptr<const Predictor> pbm, linear, lstm, ham;
};

/// Directory layout: data/, models/, history/, runs/, reports/.
class Workspace {
 public:
  Workspace(std::filesystem::path root, WorkspaceConfig cfg);

  const std::filesystem::path& root() const { return root_; }
  const WorkspaceConfig& config() const { return cfg_; }
  std::filesystem::path data_dir() const { return root_ / "data"; }
  std::filesystem::path models_dir() const { return root_ / "models"; }
  std::filesystem::path history_dir() const { return root_ / "history"; }
  std::filesystem::path runs_dir() const { return root_ / "runs"; }
  std::filesystem::path reports_dir() const { return root_ / "reports"; }
  std::filesystem::path checkpoint_path(std::string_view model) const;

  /// Excitation episodes, split manifest and the guide run in history.
  DatasetManifest generate_data();
  LoadedDataset load_data() const;

  /// Trains one of "arx", "lstm", "ham" and writes its checkpoint (and
  /// loss curve for the networks).
  std::shared_ptr<const Predictor> train(std::string_view model);

  /// Loads whatever checkpoints exist; missing ones stay null.
  TrainedModels load_models() const;
  std::vector<ModelError> evaluate_models() const;

  std::shared_ptr<HistoryStore> open_history() const;
  ControllerRegistry registry() const;

 private:
  std::filesystem::path root_;
  WorkspaceConfig cfg_;
};

}  // namespace llmctl
