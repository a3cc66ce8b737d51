#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmctl/evalreport.hpp"
#include "llmctl/looprunner.hpp"

namespace llmctl {

/// Body of a `state` event and one element of GET /runs/{id}/log.
nlohmann::json state_json(const RunRow& row, EpochSeconds run_start);

/// One server-sent event frame: optional id, event name, single-line data.
std::string format_sse(std::string_view event, std::string_view data, std::optional<int> id = std::nullopt);

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// A run is over and no longer takes commands.
class ConflictError : public Error {
 public:
  using Error::Error;
};

struct GatewayOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path runs_root = "runs";
  ControllerRegistry registry;
  RunConfig defaults;              // plant, schedule, seed; overridable per run
  std::size_t subscriber_buffer = 1024;  // events a subscriber may lag before drops
  int tick_delay_ms = 0;
};

struct StreamEvent {
  std::string kind;  // state, card or end
  int tick = -1;
  std::string data;
};

/// A run hosted by the gateway: its control thread, command queue and the
/// event log that subscribers read from.
class LiveRun {
 public:
  struct Subscriber {
    std::size_t cursor = 0;
    std::size_t dropped = 0;
  };
  struct Batch {
    std::vector<StreamEvent> events;
    std::size_t dropped = 0;  // skipped since the previous batch
    bool finished = false;     // end event delivered, nothing more will come
  };

  LiveRun(std::string id, EpochSeconds start, std::size_t buffer);
  ~LiveRun();

  const std::string& id() const { return id_; }
  EpochSeconds start() const { return start_; }

  /// Subscribes from the first event of tick `from` (0 replays everything).
  std::shared_ptr<Subscriber> subscribe(int from = 0);
  /// Waits up to `timeout` for events past the subscriber's cursor. If it has
  /// fallen more than the buffer size behind, the oldest are skipped.
  Batch next(Subscriber& sub, std::chrono::milliseconds timeout);

  /// Queues a command; returns the first tick it can affect.
  int command(OperatorCommand cmd);

  std::vector<RunRow> rows() const;
  std::string status() const;
  bool finished() const;
  std::size_t total_dropped() const;
  std::size_t subscribers() const;
  void wait() const;

  void start_thread(RunConfig cfg, Controller controller, const ControllerRegistry& registry);
  void publish_tick(const RunRow& row, const DecisionCard& card);
  void publish_end(const std::string& status);
  void request_stop();

 private:
  std::string id_;
  EpochSeconds start_;
  std::size_t buffer_;
  CommandQueue queue_;
  std::thread thread_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::vector<StreamEvent> events_;
  std::vector<RunRow> rows_;
  std::string status_ = "running";
  bool finished_ = false;
  std::size_t total_dropped_ = 0;
  std::size_t subscribers_ = 0;
};

/// HTTP service:
///   POST /runs                  {"controller": NAME, "penalty"?, "seed"?, "schedule"?, "objective"?,
///                                "T0"?, "tick_delay_ms"?}        -> 201 {"run_id", ...}
///   GET  /runs                  -> {"runs": [...]}
///   GET  /runs/{id}             -> status, ticks, subscriber and drop counts
///   POST /runs/{id}/commands    OperatorCommand JSON            -> 202 {"accepted", "applies_from_tick"}
///   GET  /runs/{id}/events      text/event-stream; `state` and `card` per tick, then `end`.
///                               ?from=N or Last-Event-ID resume; only card events carry ids.
///   GET  /runs/{id}/log         {"run_id", "status", "rows": [...]}; ?format=csv gives log.csv
///   GET  /runs/{id}/metrics     RunMetrics plus settled_mae
/// Errors are {"error": reason} with 400, 404 or 409.
class Gateway {
 public:
  explicit Gateway(GatewayOptions options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Blocks serving on the calling thread.
  void serve();
  /// Stops every run and the server.
  void stop();

  /// The handlers' logic, callable without HTTP.
  nlohmann::json start_run(const nlohmann::json& body);
  nlohmann::json post_command(const std::string& id, const nlohmann::json& body);
  nlohmann::json run_info(const std::string& id) const;
  nlohmann::json list_runs() const;
  nlohmann::json log_json(const std::string& id) const;
  std::string log_csv(const std::string& id) const;
  nlohmann::json metrics_json(const std::string& id) const;
  std::shared_ptr<LiveRun> live(const std::string& id) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace llmctl
