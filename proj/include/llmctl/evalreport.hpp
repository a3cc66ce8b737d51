#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "llmctl/looprunner.hpp"

namespace llmctl {

struct RunMetrics {
  std::string name;
  double mae = 0;                // mean |T - target| over all ticks
  double heater_mean = 0;
  double fan_fraction = 0;
  double fallback_fraction = 0;

  bool operator==(const RunMetrics&) const = default;
};

/// Throws ValidationError on an empty log.
RunMetrics compute_metrics(const RunLog& log);
RunMetrics compute_metrics(const std::string& name, std::span<const RunRow> rows);

/// Tracking MAE that skips `skip` ticks after the start and after every
/// target change.
double settled_mae(std::span<const RunRow> rows, int skip = 10);

struct ModelError {
  std::string model;
  double mae = 0;
  std::size_t pairs = 0;
};

using NamedPredictor = std::pair<std::string, std::shared_ptr<const Predictor>>;

/// One-step MAE of each model over every (window, next T) pair of the test
/// episodes; all models see the same pairs.
std::vector<ModelError> model_intercomparison(const std::vector<NamedPredictor>& models,
                                              const std::vector<Episode>& test, std::size_t lookback = 10);
void write_model_table(const std::vector<ModelError>& table, const std::filesystem::path& path);

/// Metrics of a name and its -P twin.
struct PenaltyDelta {
  std::string base;
  std::string penalized;
  double fan_change = 0;     // penalized - base
  double heater_change = 0;
  double mae_change = 0;
};
std::vector<PenaltyDelta> penalty_deltas(const std::vector<RunMetrics>& metrics);

/// Writes metrics.csv, penalty_deltas.csv and summary.json into `dir`.
void write_report(const std::vector<RunMetrics>& metrics, const std::filesystem::path& dir);
std::vector<RunMetrics> read_metrics_csv(const std::filesystem::path& path);

}  // namespace llmctl
