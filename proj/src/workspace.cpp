#include "llmctl/workspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace llmctl {

namespace {

nn::TrainConfig train_from_json(nn::TrainConfig t, const nlohmann::json& j) {
  t.epochs = j.value("epochs", t.epochs);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.min_delta = j.value("min_delta", t.min_delta);
  t.patience = j.value("patience", t.patience);
  t.seed = j.value("seed", t.seed);
  t.verbose = j.value("verbose", t.verbose);
  t.validate();
  return t;
}

std::vector<WindowSample> windows_of(const std::vector<Episode>& eps, std::size_t lookback) {
  std::vector<WindowSample> out;
  for (const auto& e : eps) {
    auto w = make_windows(e, lookback);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

std::vector<ResidualSample> residuals_of(const std::vector<Episode>& eps, const PlantParams& p) {
  std::vector<ResidualSample> out;
  for (const auto& e : eps) {
    auto r = make_costa_samples(e, p);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace

WorkspaceConfig WorkspaceConfig::from_json(const nlohmann::json& j) {
  WorkspaceConfig c;
  if (j.contains("plant")) {
    std::ostringstream kv;
    for (const auto& [k, v] : j["plant"].items()) kv << k << " = " << v.dump() << "\n";
    c.plant = parse_plant_config(kv.str());
  }
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    c.episodes = d.value("episodes", c.episodes);
    c.minutes = d.value("minutes", c.minutes);
    c.data_seed = d.value("seed", c.data_seed);
    c.test_fraction = d.value("test_fraction", c.test_fraction);
    c.val_fraction = d.value("val_fraction", c.val_fraction);
    c.lookback = d.value("lookback", c.lookback);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    c.arx_p = t.value("arx_p", c.arx_p);
    c.arx_q = t.value("arx_q", c.arx_q);
    if (t.contains("lstm")) c.lstm_train = train_from_json(c.lstm_train, t["lstm"]);
    if (t.contains("ham")) c.costa_train = train_from_json(c.costa_train, t["ham"]);
  }
  if (j.contains("backend")) {
    const auto& b = j["backend"];
    const std::string kind = b.value("kind", "mock");
    if (kind != "mock" && kind != "remote") throw ValidationError("backend.kind must be mock or remote");
    c.backend.kind = kind == "remote" ? BackendKind::Remote : BackendKind::Mock;
    c.backend.endpoint = b.value("endpoint", c.backend.endpoint);
    c.backend.model = b.value("model", c.backend.model);
    c.backend.timeout_s = b.value("timeout_s", c.backend.timeout_s);
    c.backend.retries = b.value("retries", c.backend.retries);
    c.backend.api_key_env = b.value("api_key_env", c.backend.api_key_env);
    if (b.contains("fields")) {
      auto& f = c.backend.fields;
      const auto& m = b["fields"];
      f.model = m.value("model", f.model);
      f.temperature = m.value("temperature", f.temperature);
      f.messages = m.value("messages", f.messages);
      f.tools = m.value("tools", f.tools);
      f.choices = m.value("choices", f.choices);
      f.message = m.value("message", f.message);
    }
  }
  if (j.contains("mock")) {
    const auto& m = j["mock"];
    c.mock.candidate_steps = m.value("candidate_steps", c.mock.candidate_steps);
    c.mock.fan_candidates = m.value("fan_candidates", c.mock.fan_candidates);
    c.mock.refine = m.value("refine", c.mock.refine);
    c.mock.refine_radius = m.value("refine_radius", c.mock.refine_radius);
    c.mock.horizon = m.value("horizon", c.mock.horizon);
    c.mock.penalty_weight = m.value("penalty_weight", c.mock.penalty_weight);
    c.mock.validate();
  }
  if (j.contains("run")) {
    const auto& r = j["run"];
    if (r.contains("schedule")) c.schedule = ReferenceSchedule::from_json(r["schedule"]);
    c.run_seed = r.value("seed", c.run_seed);
    c.max_rounds = r.value("max_rounds", c.max_rounds);
    c.guardrail = r.value("guardrail", c.guardrail);
  }
  return c;
}

WorkspaceConfig WorkspaceConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  try {
    return from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string guide_experiment_id() { return std::string(kGuideController) + "2025-03-01T12:41:30"; }
EpochSeconds guide_start_time() { return parse_timestamp("2025-03-01 12:45:58"); }

ControlInput reference_control(double target, double T, double T_amb, const PlantParams& p) {
  const double rise = target - T_amb;
  const double g = p.heater_gain();
  const double eff = p.eta0 * (1.0 - p.beta * rise);
  double u = eff > 0 ? p.k_loss * rise / (eff * g) : 1.0;
  u += 0.05 * (target - T);
  const bool fan = T > target + 0.3;
  return snap_control(std::clamp(u, 0.0, 1.0), fan ? 1 : 0).control;
}

std::vector<RunTick> simulate_guide_run(const PlantConfig& plant, const ReferenceSchedule& schedule,
                                        EpochSeconds start, std::uint64_t seed) {
  schedule.validate();
  TruthPlant truth(plant.params, plant.ambient, plant.ambient.at(0), seed);
  std::vector<RunTick> ticks;
  for (int k = 0; k < schedule.ticks(); ++k) {
    const double t = k * kControlPeriod;
    const double T = truth.measured();
    const double amb = truth.latent().T_amb;
    const auto u = reference_control(schedule.target_at(t), T, amb, plant.params);
    ticks.push_back({start + static_cast<EpochSeconds>(t), T, u, amb});
    truth.step(u);
  }
  return ticks;
}

Workspace::Workspace(std::filesystem::path root, WorkspaceConfig cfg) : root_(std::move(root)), cfg_(std::move(cfg)) {}

std::filesystem::path Workspace::checkpoint_path(std::string_view model) const {
  return models_dir() / (std::string(model) + ".json");
}

DatasetManifest Workspace::generate_data() {
  const auto eps = generate_dataset(cfg_.episodes, cfg_.minutes, cfg_.plant, cfg_.data_seed,
                                    parse_timestamp("2025-01-06 08:00:00"));
  const auto splits = assign_splits(eps.size(), cfg_.test_fraction, cfg_.val_fraction, cfg_.data_seed);
  const auto manifest = save_dataset(eps, splits, data_dir(), cfg_.lookback);

  HistoryStore store(history_dir());
  if (!store.find_experiment(guide_experiment_id())) {
    const auto ticks = simulate_guide_run(cfg_.plant, cfg_.schedule, guide_start_time(), cfg_.data_seed + 1);
    store.ingest_run(guide_experiment_id(), kGuideController, ticks);
  }
  return manifest;
}

LoadedDataset Workspace::load_data() const {
  if (!std::filesystem::exists(data_dir() / "manifest.json")) {
    throw ValidationError("no dataset in " + data_dir().string() + ": run `llmctl gen-data` first");
  }
  return load_dataset(data_dir());
}

std::shared_ptr<const Predictor> Workspace::train(std::string_view model) {
  const auto data = load_data();
  std::filesystem::create_directories(models_dir());
  const std::size_t L = data.manifest.lookback;
  if (model == "arx") {
    const auto fit = fit_arx(windows_of(data.train, L), cfg_.arx_p, cfg_.arx_q);
    save_checkpoint(arx_to_json(fit.model), checkpoint_path("arx"));
    return std::make_shared<ArxPredictor>(fit.model);
  }
  if (model == "lstm") {
    auto t = train_lstm(windows_of(data.train, L), windows_of(data.validation, L), cfg_.lstm_train,
                        nn::LstmNet::Config{.steps = static_cast<Eigen::Index>(L)});
    save_checkpoint(lstm_to_json(*t.model), checkpoint_path("lstm"));
    nn::write_loss_curve_csv(t.result, models_dir() / "lstm_loss.csv");
    return t.model;
  }
  if (model == "ham") {
    auto t = train_costa(residuals_of(data.train, cfg_.plant.params), residuals_of(data.validation, cfg_.plant.params),
                         cfg_.plant.params, cfg_.costa_train);
    save_checkpoint(costa_to_json(*t.model), checkpoint_path("ham"));
    nn::write_loss_curve_csv(t.result, models_dir() / "ham_loss.csv");
    return t.model;
  }
  throw ValidationError("unknown model '" + std::string(model) + "': use arx, lstm or ham");
}

TrainedModels Workspace::load_models() const {
  TrainedModels m;
  m.pbm = std::make_shared<PbmPredictor>(cfg_.plant.params);
  const auto load = [&](const char* name) -> std::shared_ptr<const Predictor> {
    const auto p = checkpoint_path(name);
    return std::filesystem::exists(p) ? load_checkpoint(p) : nullptr;
  };
  m.linear = load("arx");
  m.lstm = load("lstm");
  m.ham = load("ham");
  return m;
}

std::vector<ModelError> Workspace::evaluate_models() const {
  const auto data = load_data();
  const auto m = load_models();
  std::vector<NamedPredictor> models{{"PBM", m.pbm}};
  const auto add = [&](const char* name, const char* cli, const std::shared_ptr<const Predictor>& p) {
    if (!p) throw ValidationError(std::string(name) + " is not trained: run `llmctl train --model " + cli + "`");
    models.emplace_back(name, p);
  };
  add("ARX", "arx", m.linear);
  add("LSTM", "lstm", m.lstm);
  add("CoSTA", "ham", m.ham);
  return model_intercomparison(models, data.test, data.manifest.lookback);
}

std::shared_ptr<HistoryStore> Workspace::open_history() const {
  return std::make_shared<HistoryStore>(history_dir());
}

ControllerRegistry Workspace::registry() const {
  ControllerRegistry r;
  const auto m = load_models();
  r.linear = m.linear;
  r.lstm = m.lstm;
  r.ham = m.ham;
  if (std::filesystem::exists(history_dir())) {
    r.history = open_history();
    r.guide_experiment = guide_experiment_id();
  }
  r.backend = cfg_.backend;
  if (r.backend.kind == BackendKind::Remote) r.backend = remote_config_from_env(r.backend);
  r.mock = cfg_.mock;
  r.max_rounds = cfg_.max_rounds;
  r.guardrail = cfg_.guardrail;
  return r;
}

}  // namespace llmctl
