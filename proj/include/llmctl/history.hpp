#pragma once

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "llmctl/control.hpp"
#include "llmctl/sql.hpp"
#include "llmctl/timefmt.hpp"

namespace llmctl {

struct ExperimentRecord {
  std::string id;
  std::string start_time;  // YYYY-MM-DD HH:MM:SS
  std::string end_time;
  std::string controller_name;

  bool operator==(const ExperimentRecord&) const = default;
};

struct TimeseriesRow {
  std::string time;
  double temperature = 0;
  double heater = 0;
  int fan = 0;
  double ambient = 0;

  bool operator==(const TimeseriesRow&) const = default;
};

/// One control tick to be archived: the measurement at `time` and the
/// control applied from it.
struct RunTick {
  EpochSeconds time = 0;
  double temperature = 0;
  ControlInput u;
  double ambient = 0;
};

class DuplicateExperimentError : public Error {
 public:
  using Error::Error;
};

struct IngestCounts {
  std::size_t experiments = 0;
  std::size_t rows = 0;
};

/// Two append-only tables backed by CSV files. One writer, many readers;
/// each query sees the tables as they were when it started.
class HistoryStore {
 public:
  /// Opens (creating if needed) `experiments.csv` and `timeseries_data.csv`
  /// in `dir`.
  explicit HistoryStore(std::filesystem::path dir);
  /// Memory-only store, used by tests.
  HistoryStore();

  /// Appends one experiment row and one timeseries row per tick, then
  /// flushes both files. Throws before touching anything on a duplicate id,
  /// an empty run or ticks that are not strictly increasing.
  IngestCounts ingest_run(const std::string& experiment_id, const std::string& controller_name,
                          std::span<const RunTick> ticks);

  sql::ResultTable execute(const sql::QueryAst& ast) const;
  /// parse_query followed by execute.
  sql::ResultTable query(std::string_view text) const;

  std::optional<ExperimentRecord> find_experiment(const std::string& id) const;
  std::size_t experiment_count() const;
  std::size_t row_count() const;
  const std::optional<std::filesystem::path>& directory() const { return dir_; }

 private:
  void load();

  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mutex_;
  std::vector<ExperimentRecord> experiments_;
  std::vector<TimeseriesRow> rows_;
};

/// Schema summary handed to the language model.
std::string describe_history_schema();

}  // namespace llmctl
