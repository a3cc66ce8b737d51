#include "llmctl/gateway.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdio>

namespace llmctl {

nlohmann::json state_json(const RunRow& row, EpochSeconds run_start) {
  return {{"tick", row.tick},
          {"t", row.t},
          {"time", format_timestamp(run_start + static_cast<EpochSeconds>(std::llround(row.t)))},
          {"target", row.target},
          {"T", row.T},
          {"T_amb", row.T_amb},
          {"heater_duty_cycle", row.u.heater()},
          {"fan_on", row.u.fan_on()},
          {"fallback", row.fallback},
          {"verdict", to_string(row.verdict)},
          {"controller", row.controller}};
}

std::string format_sse(std::string_view event, std::string_view data, std::optional<int> id) {
  std::string out;
  if (id) out += "id: " + std::to_string(*id) + "\n";
  out += "event: ";
  out += event;
  out += "\ndata: ";
  out += data;
  out += "\n\n";
  return out;
}

LiveRun::LiveRun(std::string id, EpochSeconds start, std::size_t buffer)
    : id_(std::move(id)), start_(start), buffer_(std::max<std::size_t>(buffer, 2)) {}

LiveRun::~LiveRun() {
  request_stop();
  if (thread_.joinable()) thread_.join();
}

std::shared_ptr<LiveRun::Subscriber> LiveRun::subscribe(int from) {
  std::lock_guard lock(mutex_);
  auto sub = std::make_shared<Subscriber>();
  while (sub->cursor < events_.size() && events_[sub->cursor].kind != "end" && events_[sub->cursor].tick < from) {
    ++sub->cursor;
  }
  ++subscribers_;
  return sub;
}

LiveRun::Batch LiveRun::next(Subscriber& sub, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return sub.cursor < events_.size(); });
  Batch b;
  if (events_.size() - sub.cursor > buffer_) {
    b.dropped = events_.size() - buffer_ - sub.cursor;
    sub.cursor += b.dropped;
    sub.dropped += b.dropped;
    total_dropped_ += b.dropped;
  }
  b.events.assign(events_.begin() + static_cast<std::ptrdiff_t>(sub.cursor), events_.end());
  sub.cursor = events_.size();
  b.finished = finished_ && sub.cursor == events_.size();
  return b;
}

int LiveRun::command(OperatorCommand cmd) {
  std::lock_guard lock(mutex_);
  if (finished_) throw ConflictError("run " + id_ + " has ended (" + status_ + ")");
  queue_.push(std::move(cmd));
  return static_cast<int>(rows_.size());
}

std::vector<RunRow> LiveRun::rows() const {
  std::lock_guard lock(mutex_);
  return rows_;
}

std::string LiveRun::status() const {
  std::lock_guard lock(mutex_);
  return status_;
}

bool LiveRun::finished() const {
  std::lock_guard lock(mutex_);
  return finished_;
}

std::size_t LiveRun::total_dropped() const {
  std::lock_guard lock(mutex_);
  return total_dropped_;
}

std::size_t LiveRun::subscribers() const {
  std::lock_guard lock(mutex_);
  return subscribers_;
}

void LiveRun::wait() const {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return finished_; });
}

void LiveRun::publish_tick(const RunRow& row, const DecisionCard& card) {
  std::lock_guard lock(mutex_);
  rows_.push_back(row);
  events_.push_back({"state", row.tick, state_json(row, start_).dump()});
  events_.push_back({"card", row.tick, to_json(card).dump()});
  cv_.notify_all();
}

void LiveRun::publish_end(const std::string& status) {
  std::lock_guard lock(mutex_);
  status_ = status;
  finished_ = true;
  events_.push_back({"end", -1, nlohmann::json{{"status", status}, {"ticks", rows_.size()}}.dump()});
  cv_.notify_all();
}

void LiveRun::request_stop() {
  std::lock_guard lock(mutex_);
  if (!finished_) queue_.push({OperatorCommand::Kind::Stop});
}

void LiveRun::start_thread(RunConfig cfg, Controller controller, const ControllerRegistry& registry) {
  thread_ = std::thread([this, cfg = std::move(cfg), controller = std::move(controller), registry] {
    RunObserver obs;
    obs.on_tick = [this](const RunRow& row, const DecisionCard& card) { publish_tick(row, card); };
    try {
      const auto log = run_closed_loop(cfg, controller, registry, &queue_, &obs);
      publish_end(log.status);
    } catch (const std::exception& e) {
      publish_end(std::string("aborted: ") + e.what());
    }
  });
}

struct Gateway::Impl {
  GatewayOptions opt;
  httplib::Server server;
  std::thread server_thread;
  mutable std::mutex mutex;
  std::map<std::string, std::shared_ptr<LiveRun>> runs;
  std::atomic<bool> stopping{false};

  explicit Impl(GatewayOptions o) : opt(std::move(o)) {}

  std::shared_ptr<LiveRun> find(const std::string& id) {
    std::lock_guard lock(mutex);
    if (auto it = runs.find(id); it != runs.end()) return it->second;
    // Finished runs from earlier sessions are served from their directory.
    const auto dir = opt.runs_root / id;
    if (id.find('/') != std::string::npos || id == "." || id == ".." || !std::filesystem::exists(dir / "run.json")) {
      throw NotFoundError("unknown run id '" + id + "'");
    }
    const auto log = load_run(dir);
    auto run = std::make_shared<LiveRun>(log.run_id, log.start_time, opt.subscriber_buffer);
    for (std::size_t k = 0; k < log.rows.size(); ++k) {
      run->publish_tick(log.rows[k], k < log.cards.size() ? log.cards[k] : DecisionCard{});
    }
    run->publish_end(log.status);
    runs.emplace(id, run);
    return run;
  }
};

Gateway::Gateway(GatewayOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  auto& s = impl_->server;
  const auto json_reply = [](httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  const auto guarded = [json_reply](auto fn) {
    return [fn, json_reply](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const NotFoundError& e) {
        json_reply(res, 404, {{"error", e.what()}});
      } catch (const ConflictError& e) {
        json_reply(res, 409, {{"error", e.what()}});
      } catch (const ValidationError& e) {
        json_reply(res, 400, {{"error", e.what()}});
      } catch (const nlohmann::json::exception& e) {
        json_reply(res, 400, {{"error", std::string("invalid JSON: ") + e.what()}});
      } catch (const std::exception& e) {
        json_reply(res, 500, {{"error", e.what()}});
      }
    };
  };
  const auto body_json = [](const httplib::Request& req) {
    return req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
  };

  s.Post("/runs", guarded([this, json_reply, body_json](const httplib::Request& req, httplib::Response& res) {
           json_reply(res, 201, start_run(body_json(req)));
         }));
  s.Get("/runs", guarded([this, json_reply](const httplib::Request&, httplib::Response& res) {
          json_reply(res, 200, list_runs());
        }));
  s.Get(R"(/runs/([^/]+))", guarded([this, json_reply](const httplib::Request& req, httplib::Response& res) {
          json_reply(res, 200, run_info(req.matches[1]));
        }));
  s.Post(R"(/runs/([^/]+)/commands)",
         guarded([this, json_reply, body_json](const httplib::Request& req, httplib::Response& res) {
           json_reply(res, 202, post_command(req.matches[1], body_json(req)));
         }));
  s.Get(R"(/runs/([^/]+)/log)", guarded([this, json_reply](const httplib::Request& req, httplib::Response& res) {
          if (req.get_param_value("format") == "csv") {
            res.set_content(log_csv(req.matches[1]), "text/csv");
          } else {
            json_reply(res, 200, log_json(req.matches[1]));
          }
        }));
  s.Get(R"(/runs/([^/]+)/metrics)", guarded([this, json_reply](const httplib::Request& req, httplib::Response& res) {
          json_reply(res, 200, metrics_json(req.matches[1]));
        }));
  s.Get(R"(/runs/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          auto run = impl_->find(req.matches[1]);
          int from = 0;
          try {
            if (req.has_param("from")) from = std::stoi(req.get_param_value("from"));
            if (req.has_header("Last-Event-ID")) from = std::stoi(req.get_header_value("Last-Event-ID")) + 1;
          } catch (const std::exception&) {
            throw ValidationError("from and Last-Event-ID must be integers");
          }
          auto sub = run->subscribe(from);
          res.set_header("Cache-Control", "no-cache");
          res.set_chunked_content_provider("text/event-stream", [this, run, sub](std::size_t, httplib::DataSink& sink) {
            if (impl_->stopping) {
              sink.done();
              return true;
            }
            const auto batch = run->next(*sub, std::chrono::milliseconds(250));
            std::string out;
            // Comments are not events, so drops are reported without inventing ticks.
            if (batch.dropped) {
              out += ": dropped " + std::to_string(batch.dropped) + " events (" + std::to_string(sub->dropped) +
                     " total)\n\n";
            }
            for (const auto& e : batch.events) {
              out += format_sse(e.kind, e.data, e.kind == "card" ? std::optional<int>(e.tick) : std::nullopt);
            }
            if (!out.empty() && !sink.write(out.data(), out.size())) return false;
            if (batch.finished) sink.done();
            return true;
          });
        }));
}

Gateway::~Gateway() { stop(); }

int Gateway::start() {
  auto& s = impl_->server;
  int port = impl_->opt.port;
  if (port == 0) {
    port = s.bind_to_any_port(impl_->opt.host);
  } else if (!s.bind_to_port(impl_->opt.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot bind " + impl_->opt.host + ":" + std::to_string(impl_->opt.port));
  impl_->server_thread = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return port;
}

void Gateway::serve() {
  if (!impl_->server.listen(impl_->opt.host, impl_->opt.port)) {
    throw IoError("cannot listen on " + impl_->opt.host + ":" + std::to_string(impl_->opt.port));
  }
}

void Gateway::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  std::vector<std::shared_ptr<LiveRun>> runs;
  {
    std::lock_guard lock(impl_->mutex);
    for (auto& [id, r] : impl_->runs) runs.push_back(r);
  }
  for (auto& r : runs) r->request_stop();
  for (auto& r : runs) r->wait();
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

nlohmann::json Gateway::start_run(const nlohmann::json& body) {
  if (!body.is_object()) throw ValidationError("body must be a JSON object");
  if (!body.contains("controller") || !body["controller"].is_string()) {
    throw ValidationError("controller (string) is required, e.g. \"LLM-HAM-Te0-P\"");
  }
  auto name = parse_controller_name(body["controller"].get<std::string>());
  if (body.contains("penalty")) {
    if (!body["penalty"].is_boolean()) throw ValidationError("penalty must be a boolean");
    name.penalty = name.penalty || body["penalty"].get<bool>();
  }
  RunConfig cfg = impl_->opt.defaults;
  cfg.tick_delay_ms = impl_->opt.tick_delay_ms;
  if (body.contains("seed")) {
    if (!body["seed"].is_number_unsigned()) throw ValidationError("seed must be a non-negative integer");
    cfg.seed = body["seed"].get<std::uint64_t>();
  }
  if (body.contains("schedule")) {
    try {
      cfg.schedule = ReferenceSchedule::from_json(body["schedule"]);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("schedule: ") + e.what());
    }
  }
  if (body.contains("objective")) {
    if (!body["objective"].is_string()) throw ValidationError("objective must be a string");
    cfg.objective = body["objective"].get<std::string>();
  }
  if (body.contains("T0")) {
    if (!body["T0"].is_number() || !std::isfinite(body["T0"].get<double>())) {
      throw ValidationError("T0 must be a finite number");
    }
    cfg.T0 = body["T0"].get<double>();
  }
  if (body.contains("tick_delay_ms")) {
    const auto& d = body["tick_delay_ms"];
    if (!d.is_number_integer() || d.get<int>() < 0 || d.get<int>() > 60000) {
      throw ValidationError("tick_delay_ms must be an integer in [0, 60000]");
    }
    cfg.tick_delay_ms = d.get<int>();
  }
  auto controller = make_controller(name, impl_->opt.registry);
  const std::string rendered = render_controller_name(name);

  std::shared_ptr<LiveRun> run;
  {
    std::lock_guard lock(impl_->mutex);
    if (impl_->stopping) throw ConflictError("gateway is shutting down");
    EpochSeconds start = now_epoch_seconds();
    auto id = make_run_id(rendered, start);
    while (impl_->runs.count(id) || std::filesystem::exists(impl_->opt.runs_root / id)) {
      id = make_run_id(rendered, ++start);
    }
    cfg.start_time = start;
    cfg.output_root = impl_->opt.runs_root;
    run = std::make_shared<LiveRun>(id, start, impl_->opt.subscriber_buffer);
    impl_->runs.emplace(id, run);
  }
  run->start_thread(cfg, std::move(controller), impl_->opt.registry);
  return {{"run_id", run->id()},
          {"controller", rendered},
          {"ticks", cfg.schedule.ticks()},
          {"start_time", format_timestamp(run->start())},
          {"events", "/runs/" + run->id() + "/events"}};
}

nlohmann::json Gateway::post_command(const std::string& id, const nlohmann::json& body) {
  auto run = impl_->find(id);
  auto cmd = OperatorCommand::from_json(body);
  if (cmd.kind == OperatorCommand::Kind::SetVariant) {
    // Refuse variants whose artifacts are missing now rather than mid-run.
    make_controller(cmd.text, impl_->opt.registry);
  }
  cmd.issued_at = now_epoch_seconds();
  const int from = run->command(cmd);
  return {{"accepted", true}, {"kind", to_string(cmd.kind)}, {"applies_from_tick", from}};
}

nlohmann::json Gateway::run_info(const std::string& id) const {
  auto run = impl_->find(id);
  const auto rows = run->rows();
  return {{"run_id", run->id()},
          {"status", run->status()},
          {"ticks", rows.size()},
          {"controller", rows.empty() ? "" : rows.back().controller},
          {"start_time", format_timestamp(run->start())},
          {"subscribers", run->subscribers()},
          {"dropped_events", run->total_dropped()}};
}

nlohmann::json Gateway::list_runs() const {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(impl_->mutex);
    for (const auto& [id, r] : impl_->runs) ids.push_back(id);
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& id : ids) out.push_back(run_info(id));
  return {{"runs", out}};
}

nlohmann::json Gateway::log_json(const std::string& id) const {
  auto run = impl_->find(id);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : run->rows()) rows.push_back(state_json(r, run->start()));
  return {{"run_id", run->id()}, {"status", run->status()}, {"rows", rows}};
}

std::string Gateway::log_csv(const std::string& id) const {
  auto run = impl_->find(id);
  RunLog log;
  log.rows = run->rows();
  return run_log_csv(log);
}

nlohmann::json Gateway::metrics_json(const std::string& id) const {
  auto run = impl_->find(id);
  const auto rows = run->rows();
  if (rows.empty()) throw ConflictError("run " + id + " has no ticks yet");
  const auto m = compute_metrics(rows.front().controller, rows);
  nlohmann::json settled = nullptr;
  try {
    settled = settled_mae(rows);
  } catch (const ValidationError&) {
  }
  return {{"run_id", run->id()},
          {"name", m.name},
          {"mae", m.mae},
          {"settled_mae", settled},
          {"heater_mean", m.heater_mean},
          {"fan_fraction", m.fan_fraction},
          {"fallback_fraction", m.fallback_fraction},
          {"ticks", rows.size()},
          {"status", run->status()}};
}

std::shared_ptr<LiveRun> Gateway::live(const std::string& id) const { return impl_->find(id); }

}  // namespace llmctl
