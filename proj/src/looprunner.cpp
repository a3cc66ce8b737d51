#include "llmctl/looprunner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace llmctl {

void ReferenceSchedule::validate() const {
  if (points.empty()) throw ValidationError("schedule has no breakpoints");
  if (points.front().start_s != 0) throw ValidationError("schedule must start at t = 0");
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!std::isfinite(points[k].target)) throw ValidationError("schedule target must be finite");
    if (k && !(points[k].start_s > points[k - 1].start_s)) {
      throw ValidationError("schedule breakpoints must strictly increase");
    }
  }
  if (!(duration_s > points.back().start_s)) throw ValidationError("schedule duration must cover the last breakpoint");
  if (duration_s < kControlPeriod) throw ValidationError("schedule shorter than one control period");
}

double ReferenceSchedule::target_at(double t) const {
  double target = points.front().target;
  for (const auto& p : points) {
    if (p.start_s <= t) target = p.target;
  }
  return target;
}

int ReferenceSchedule::ticks() const { return static_cast<int>(std::floor(duration_s / kControlPeriod + 1e-9)); }

ReferenceSchedule ReferenceSchedule::standard() {
  return {{{0, 27.0}, {5400, 30.0}, {10800, 27.34}, {16200, 24.0}}, 21600};
}

nlohmann::json ReferenceSchedule::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) pts.push_back({{"start_s", p.start_s}, {"target", p.target}});
  return {{"points", pts}, {"duration_s", duration_s}};
}

ReferenceSchedule ReferenceSchedule::from_json(const nlohmann::json& j) {
  ReferenceSchedule s;
  for (const auto& p : j.at("points")) s.points.push_back({p.at("start_s").get<double>(), p.at("target").get<double>()});
  s.duration_s = j.at("duration_s").get<double>();
  s.validate();
  return s;
}

Controller make_controller(const ControllerName& name, const ControllerRegistry& reg) {
  Controller c;
  c.name = name;
  c.base.tool = name.assistance;
  c.base.penalty = name.penalty;

  AgentConfig acfg{architecture_for(name.assistance), reg.max_rounds, reg.guardrail};
  std::vector<std::shared_ptr<const AgentTool>> tools;
  switch (name.assistance) {
    case Assistance::None: break;
    case Assistance::SQL:
      if (!reg.history) throw ValidationError("LLM-SQL needs the history store: run `llmctl gen-data` first");
      if (reg.guide_experiment.empty()) {
        throw ValidationError("LLM-SQL needs a guide experiment id: run `llmctl gen-data` or set guide_experiment");
      }
      if (!reg.history->find_experiment(reg.guide_experiment)) {
        throw ValidationError("guide experiment '" + reg.guide_experiment + "' is not in the history store");
      }
      c.base.guide_experiment = reg.guide_experiment;
      tools.push_back(std::make_shared<QueryHistoryTool>(reg.history));
      break;
    case Assistance::Linear:
    case Assistance::LSTM:
    case Assistance::HAM: {
      const auto& p = name.assistance == Assistance::Linear ? reg.linear
                      : name.assistance == Assistance::LSTM ? reg.lstm
                                                            : reg.ham;
      if (!p) {
        const char* model = name.assistance == Assistance::Linear ? "arx"
                            : name.assistance == Assistance::LSTM ? "lstm"
                                                                  : "ham";
        throw ValidationError(std::string("no trained ") + std::string(to_string(name.assistance)) +
                              " predictor: run `llmctl train --model " + model + "` first");
      }
      tools.push_back(std::make_shared<SimulateTool>(p));
      break;
    }
  }
  BackendConfig bcfg = reg.backend;
  bcfg.temperature = name.te;
  std::shared_ptr<ChatBackend> backend =
      reg.backend_factory ? reg.backend_factory(bcfg) : std::shared_ptr<ChatBackend>(make_backend(bcfg, reg.mock));
  c.agent = std::make_shared<Agent>(acfg, std::move(backend), std::move(tools));
  return c;
}

Controller make_controller(std::string_view name, const ControllerRegistry& registry) {
  return make_controller(parse_controller_name(name), registry);
}

std::string_view to_string(OperatorCommand::Kind k) {
  switch (k) {
    case OperatorCommand::Kind::SetTarget: return "set_target";
    case OperatorCommand::Kind::SetPenalty: return "set_penalty";
    case OperatorCommand::Kind::SetObjectiveText: return "set_objective_text";
    case OperatorCommand::Kind::SetVariant: return "set_variant";
    case OperatorCommand::Kind::Stop: return "stop";
  }
  return "stop";
}

void OperatorCommand::validate() const {
  switch (kind) {
    case Kind::SetTarget:
      if (!std::isfinite(target) || target < kSanityMin || target > kSanityMax) {
        throw ValidationError("target must be a finite temperature within the plant's sanity band");
      }
      break;
    case Kind::SetVariant: parse_controller_name(text); break;
    case Kind::SetObjectiveText:
      if (text.size() > 2000) throw ValidationError("objective text is limited to 2000 characters");
      break;
    default: break;
  }
}

nlohmann::json OperatorCommand::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}, {"issued_at", issued_at}};
  switch (kind) {
    case Kind::SetTarget: j["target"] = target; break;
    case Kind::SetPenalty: j["penalty"] = penalty; break;
    case Kind::SetObjectiveText: j["text"] = text; break;
    case Kind::SetVariant: j["variant"] = text; break;
    case Kind::Stop: break;
  }
  return j;
}

OperatorCommand OperatorCommand::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw ValidationError("command needs a string 'kind'");
  }
  const std::string kind = j["kind"];
  OperatorCommand c;
  bool known = false;
  for (auto k : {Kind::SetTarget, Kind::SetPenalty, Kind::SetObjectiveText, Kind::SetVariant, Kind::Stop}) {
    if (kind == to_string(k)) {
      c.kind = k;
      known = true;
    }
  }
  if (!known) throw ValidationError("unknown command kind '" + kind + "'");
  const auto need = [&](const char* key, auto check, const char* type) -> const nlohmann::json& {
    if (!j.contains(key) || !check(j[key])) throw ValidationError(kind + " needs '" + key + "' (" + type + ")");
    return j[key];
  };
  switch (c.kind) {
    case Kind::SetTarget:
      c.target = need("target", [](const auto& v) { return v.is_number(); }, "number").template get<double>();
      break;
    case Kind::SetPenalty:
      c.penalty = need("penalty", [](const auto& v) { return v.is_boolean(); }, "boolean").template get<bool>();
      break;
    case Kind::SetObjectiveText:
      c.text = need("text", [](const auto& v) { return v.is_string(); }, "string").template get<std::string>();
      break;
    case Kind::SetVariant:
      c.text = need("variant", [](const auto& v) { return v.is_string(); }, "string").template get<std::string>();
      break;
    case Kind::Stop: break;
  }
  c.issued_at = j.value("issued_at", now_epoch_seconds());
  c.validate();
  return c;
}

void CommandQueue::push(OperatorCommand cmd) {
  cmd.validate();
  std::lock_guard lock(mutex_);
  queue_.push_back(std::move(cmd));
}

std::vector<OperatorCommand> CommandQueue::drain() {
  std::lock_guard lock(mutex_);
  std::vector<OperatorCommand> out(queue_.begin(), queue_.end());
  queue_.clear();
  return out;
}

std::string run_log_header() { return "tick,t,target,T,T_amb,u_h,u_f,card,fallback,verdict,controller"; }

std::string run_log_line(const RunRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.0f,%.4f,%.6f,%.6f,%.2f,%d,%d,%d,%s,", r.tick, r.t, r.target, r.T, r.T_amb,
                r.u.heater(), r.u.fan_on(), r.tick, r.fallback ? 1 : 0, std::string(to_string(r.verdict)).c_str());
  return buf + r.controller;
}

std::string run_log_csv(const RunLog& log) {
  std::string out = run_log_header() + "\n";
  for (const auto& r : log.rows) out += run_log_line(r) + "\n";
  return out;
}

nlohmann::json RunConfig::to_json() const {
  return {{"seed", seed},
          {"plant_seed", plant.seed},
          {"T0", T0 ? nlohmann::json(*T0) : nlohmann::json()},
          {"initial", {{"heater_duty_cycle", initial.heater()}, {"fan_on", initial.fan_on()}}},
          {"max_consecutive_fallbacks", max_consecutive_fallbacks},
          {"objective", objective},
          {"schedule", schedule.to_json()},
          {"ambient", {{"mean", plant.ambient.mean}, {"amplitude", plant.ambient.amplitude},
                       {"period", plant.ambient.period}}},
          {"plant",
           {{"rho", plant.params.rho}, {"V", plant.params.volume}, {"Cp", plant.params.cp},
            {"Hmax", plant.params.heater_max}, {"Fmax", plant.params.fan_max}, {"k_loss", plant.params.k_loss},
            {"eta0", plant.params.eta0}, {"beta", plant.params.beta}, {"noise_sigma", plant.params.noise_sigma},
            {"dt_int", plant.params.dt_int}}}};
}

std::string make_run_id(const std::string& controller, EpochSeconds start) {
  return controller + format_iso_compact(start);
}

namespace {

class RunWriter {
 public:
  RunWriter(const std::filesystem::path& dir, const RunLog& log) : dir_(dir) {
    std::filesystem::create_directories(dir_);
    write_meta(log);
    csv_.open(dir_ / "log.csv", std::ios::trunc);
    cards_.open(dir_ / "cards.jsonl", std::ios::trunc);
    if (!csv_ || !cards_) throw IoError("cannot create run files in " + dir_.string());
    csv_ << run_log_header() << '\n';
    csv_.flush();
  }

  void append(const RunRow& row, const DecisionCard& card) {
    csv_ << run_log_line(row) << '\n';
    cards_ << to_json(card).dump() << '\n';
    csv_.flush();
    cards_.flush();
    if (!csv_ || !cards_) throw IoError("write to " + dir_.string() + " failed");
  }

  void write_meta(const RunLog& log) {
    const nlohmann::json meta{{"run_id", log.run_id},     {"controller", log.controller},
                              {"start_time", format_timestamp(log.start_time)},
                              {"status", log.status},     {"ticks", log.rows.size()},
                              {"config", log.config}};
    const auto tmp = dir_ / "run.json.tmp";
    {
      std::ofstream f(tmp, std::ios::trunc);
      f << meta.dump(2) << '\n';
      if (!f) throw IoError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, dir_ / "run.json");
  }

 private:
  std::filesystem::path dir_;
  std::ofstream csv_, cards_;
};

}  // namespace

RunLog run_closed_loop(const RunConfig& cfg, Controller controller, const ControllerRegistry& registry,
                       CommandQueue* commands, const RunObserver* observer) {
  cfg.schedule.validate();
  cfg.plant.params.validate();
  if (cfg.max_consecutive_fallbacks < 1) throw ValidationError("max_consecutive_fallbacks must be >= 1");

  RunLog log;
  log.controller = render_controller_name(controller.name);
  log.start_time = cfg.start_time ? cfg.start_time : now_epoch_seconds();
  log.run_id = make_run_id(log.controller, log.start_time);
  log.config = cfg.to_json();
  log.config["controller"] = log.controller;

  std::optional<RunWriter> writer;
  if (cfg.output_root) writer.emplace(*cfg.output_root / log.run_id, log);

  const double T0 = cfg.T0.value_or(cfg.plant.ambient.at(0));
  TruthPlant plant(cfg.plant.params, cfg.plant.ambient, T0, cfg.seed);
  std::vector<StateSample> history;
  ControlInput u = cfg.initial;
  std::optional<double> target_override;
  std::string objective = cfg.objective;
  int consecutive_fallbacks = 0;
  const std::size_t keep = 32;

  const int ticks = cfg.schedule.ticks();
  for (int k = 0; k < ticks; ++k) {
    bool stop = false;
    if (commands) {
      for (const auto& cmd : commands->drain()) {
        switch (cmd.kind) {
          case OperatorCommand::Kind::SetTarget: target_override = cmd.target; break;
          case OperatorCommand::Kind::SetPenalty:
            controller.name.penalty = cmd.penalty;
            controller.base.penalty = cmd.penalty;
            break;
          case OperatorCommand::Kind::SetObjectiveText: objective = cmd.text; break;
          case OperatorCommand::Kind::SetVariant:
            // A variant whose artifacts are missing leaves the current one in charge.
            try {
              controller = make_controller(cmd.text, registry);
            } catch (const ValidationError&) {
              continue;
            }
            break;
          case OperatorCommand::Kind::Stop: stop = true; break;
        }
        if (observer && observer->on_command) observer->on_command(cmd);
      }
    }
    if (stop) {
      log.status = "stopped";
      break;
    }

    const double t = k * kControlPeriod;
    const double T = plant.measured();
    const double T_amb = plant.latent().T_amb;
    const double target = target_override.value_or(cfg.schedule.target_at(t));
    history.push_back({T, T_amb, u});
    if (history.size() > keep) history.erase(history.begin());

    PromptContext ctx = controller.base;
    ctx.target = target;
    ctx.current = T;
    ctx.ambient = T_amb;
    ctx.objective = objective;

    DecisionCard card = controller.agent->decide(ctx, history, u);
    card.tick = k;
    card.controller = render_controller_name(controller.name);
    u = card.decision;
    history.back().u = u;

    RunRow row{k, t, target, T, T_amb, u, card.source == "fallback", card.verdict, card.controller};
    if (writer) writer->append(row, card);
    log.rows.push_back(row);
    log.cards.push_back(card);
    if (observer && observer->on_tick) observer->on_tick(row, card);

    consecutive_fallbacks = card.verdict == Verdict::Fallback ? consecutive_fallbacks + 1 : 0;
    if (consecutive_fallbacks > cfg.max_consecutive_fallbacks) {
      log.status = "halted: " + std::to_string(consecutive_fallbacks) + " consecutive backend fallbacks";
      break;
    }
    try {
      plant.step(u);
    } catch (const PlantSanityError& e) {
      log.status = std::string("aborted: ") + e.what();
      break;
    }
    if (cfg.tick_delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg.tick_delay_ms));
  }
  if (log.status == "running") log.status = "completed";
  if (writer) writer->write_meta(log);
  if (observer && observer->on_end) observer->on_end(log);
  return log;
}

RunLog load_run(const std::filesystem::path& dir) {
  std::ifstream meta_file(dir / "run.json");
  if (!meta_file) throw IoError("no run.json in " + dir.string());
  const auto meta = nlohmann::json::parse(meta_file);
  RunLog log;
  log.run_id = meta.at("run_id");
  log.controller = meta.at("controller");
  log.start_time = parse_timestamp(meta.at("start_time").get<std::string>());
  log.status = meta.at("status");
  log.config = meta.at("config");

  std::ifstream csv(dir / "log.csv");
  std::string line;
  if (!std::getline(csv, line) || line != run_log_header()) throw IoError(dir.string() + "/log.csv: bad header");
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() == 10) f.emplace_back();
    if (f.size() != 11) throw IoError(dir.string() + "/log.csv: malformed row");
    RunRow r;
    r.tick = std::stoi(f[0]);
    r.t = std::stod(f[1]);
    r.target = std::stod(f[2]);
    r.T = std::stod(f[3]);
    r.T_amb = std::stod(f[4]);
    r.u = snap_control(std::stod(f[5]), std::stod(f[6])).control;
    r.fallback = f[8] == "1";
    r.verdict = verdict_from_string(f[9]);
    r.controller = f[10];
    log.rows.push_back(r);
  }
  std::ifstream cards(dir / "cards.jsonl");
  while (std::getline(cards, line)) {
    if (!line.empty()) log.cards.push_back(card_from_json(nlohmann::json::parse(line)));
  }
  return log;
}

IngestCounts ingest_run_log(HistoryStore& store, const RunLog& log) {
  std::vector<RunTick> ticks;
  ticks.reserve(log.rows.size());
  for (const auto& r : log.rows) {
    ticks.push_back({log.start_time + static_cast<EpochSeconds>(std::llround(r.t)), r.T, r.u, r.T_amb});
  }
  return store.ingest_run(log.run_id, log.controller, ticks);
}

}  // namespace llmctl
