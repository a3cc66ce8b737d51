#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmctl/agent.hpp"

namespace llmctl {

struct Breakpoint {
  double start_s = 0;
  double target = 0;
};

/// Piecewise-constant target trajectory.
struct ReferenceSchedule {
  std::vector<Breakpoint> points;
  double duration_s = 0;

  /// Throws unless points start at 0, strictly increase, have finite
  /// targets and end before the duration.
  void validate() const;
  double target_at(double t) const;
  int ticks() const;

  /// Six hours: 27, then 30, 27.34 and 24 °C, 90 minutes each.
  static ReferenceSchedule standard();

  nlohmann::json to_json() const;
  static ReferenceSchedule from_json(const nlohmann::json& j);
};

/// Everything a controller name can be bound to.
struct ControllerRegistry {
  std::shared_ptr<const Predictor> linear;
  std::shared_ptr<const Predictor> lstm;
  std::shared_ptr<const Predictor> ham;
  std::shared_ptr<const HistoryStore> history;
  std::string guide_experiment;
  BackendConfig backend;
  MockPolicy mock;
  int max_rounds = 6;
  bool guardrail = true;
  /// Overrides backend construction (tests inject scripted or failing ones).
  std::function<std::shared_ptr<ChatBackend>(const BackendConfig&)> backend_factory;
};

struct Controller {
  ControllerName name;
  std::shared_ptr<Agent> agent;
  PromptContext base;  // tool, penalty and guide; temperatures filled per tick
};

/// Throws NameError for bad names and ValidationError naming the missing
/// artifact and how to produce it.
Controller make_controller(const ControllerName& name, const ControllerRegistry& registry);
Controller make_controller(std::string_view name, const ControllerRegistry& registry);

struct OperatorCommand {
  enum class Kind { SetTarget, SetPenalty, SetObjectiveText, SetVariant, Stop };
  Kind kind = Kind::Stop;
  double target = 0;
  bool penalty = false;
  std::string text;  // objective text or variant name
  EpochSeconds issued_at = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// {"kind": "set_target", "target": 24.0} etc. Validates the payload.
  static OperatorCommand from_json(const nlohmann::json& j);
};
std::string_view to_string(OperatorCommand::Kind k);

/// Thread-safe FIFO drained by the control thread at tick boundaries.
class CommandQueue {
 public:
  void push(OperatorCommand cmd);
  std::vector<OperatorCommand> drain();

 private:
  std::mutex mutex_;
  std::deque<OperatorCommand> queue_;
};

struct RunRow {
  int tick = 0;
  double t = 0;  // seconds since the run started
  double target = 0;
  double T = 0;  // measurement the controller saw
  double T_amb = 0;
  ControlInput u;  // applied from t to t + 60 s
  bool fallback = false;
  Verdict verdict = Verdict::Pass;
  std::string controller;
};

struct RunLog {
  std::string run_id;
  std::string controller;  // name at start
  EpochSeconds start_time = 0;
  nlohmann::json config;
  std::vector<RunRow> rows;
  std::vector<DecisionCard> cards;
  std::string status = "running";  // completed, stopped, halted: ..., aborted: ...
};

std::string run_log_header();
std::string run_log_line(const RunRow& row);
/// The whole log.csv; identical bytes for identical runs.
std::string run_log_csv(const RunLog& log);

struct RunObserver {
  std::function<void(const RunRow&, const DecisionCard&)> on_tick;
  std::function<void(const OperatorCommand&)> on_command;
  std::function<void(const RunLog&)> on_end;
};

struct RunConfig {
  PlantConfig plant;
  ReferenceSchedule schedule = ReferenceSchedule::standard();
  std::uint64_t seed = 1;
  std::optional<double> T0;  // defaults to ambient
  ControlInput initial;
  int max_consecutive_fallbacks = 10;
  EpochSeconds start_time = 0;  // 0 means now
  std::string objective;
  int tick_delay_ms = 0;  // pacing for live viewing
  std::optional<std::filesystem::path> output_root;  // persist into <root>/<run id>/

  nlohmann::json to_json() const;
};

/// "<ControllerName><YYYY-MM-DDTHH:MM:SS>"
std::string make_run_id(const std::string& controller, EpochSeconds start);

/// Runs the loop to the end of the schedule, a stop command, a plant
/// sanity abort or too many consecutive backend fallbacks. With an output
/// root, each row and card is appended to disk before observers see it.
RunLog run_closed_loop(const RunConfig& cfg, Controller controller, const ControllerRegistry& registry,
                       CommandQueue* commands = nullptr, const RunObserver* observer = nullptr);

/// Reads a run directory written by run_closed_loop.
RunLog load_run(const std::filesystem::path& run_dir);

/// Archives a run in the history tables under its run id.
IngestCounts ingest_run_log(HistoryStore& store, const RunLog& log);

}  // namespace llmctl
