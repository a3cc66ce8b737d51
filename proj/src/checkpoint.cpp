#include "llmctl/checkpoint.hpp"

#include <fstream>

namespace llmctl {

namespace {

nlohmann::json header(const char* kind) {
  return {{"format", "llmctl-predictor"}, {"version", kCheckpointVersion}, {"kind", kind}};
}

nlohmann::json plant_to_json(const PlantParams& p) {
  return {{"rho", p.rho}, {"V", p.volume}, {"Cp", p.cp}, {"Hmax", p.heater_max}, {"Fmax", p.fan_max},
          {"dt_int", p.dt_int}};
}

PlantParams plant_from_json(const nlohmann::json& j) {
  PlantParams p = PlantParams::ideal();
  p.rho = j.at("rho");
  p.volume = j.at("V");
  p.cp = j.at("Cp");
  p.heater_max = j.at("Hmax");
  p.fan_max = j.at("Fmax");
  p.dt_int = j.at("dt_int");
  return p;
}

}  // namespace

nlohmann::json arx_to_json(const ArxModel& model) {
  auto j = header("arx");
  j["config"] = {{"p", model.p()}, {"q", model.q()}};
  j["params"] = {{"a", model.a}, {"b_h", model.b_h}, {"b_f", model.b_f}};
  return j;
}

nlohmann::json lstm_to_json(const LstmPredictor& model) {
  auto j = header("lstm");
  const auto& c = model.network().config();
  j["config"] = {{"features", c.features}, {"steps", c.steps}, {"hidden", c.hidden}, {"blocks", c.blocks},
                 {"dropout", c.dropout}};
  j["scaler"] = {{"features", model.feature_scaler().to_json()}, {"target", model.target_scaler().to_json()}};
  j["params"] = nn::params_to_json(model.network());
  return j;
}

nlohmann::json costa_to_json(const CostaModel& model) {
  auto j = header("ham");
  const auto& c = model.network().config();
  j["config"] = {{"input", c.input}, {"hidden", c.hidden}, {"dropout", c.dropout}, {"pbm", plant_to_json(model.pbm())}};
  j["scaler"] = {{"inputs", model.input_scaler().to_json()}, {"residual_scale", model.residual_scale()}};
  j["params"] = nn::params_to_json(model.network());
  return j;
}

std::shared_ptr<Predictor> predictor_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "llmctl-predictor") throw ValidationError("not a predictor checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + j.at("version").dump());
    }
    const std::string kind = j.at("kind");
    const auto& cfg = j.at("config");
    if (kind == "arx") {
      ArxModel m;
      m.a = j.at("params").at("a").get<std::vector<double>>();
      m.b_h = j.at("params").at("b_h").get<std::vector<double>>();
      m.b_f = j.at("params").at("b_f").get<std::vector<double>>();
      return std::make_shared<ArxPredictor>(std::move(m));
    }
    if (kind == "lstm") {
      nn::LstmNet::Config c;
      c.features = cfg.at("features");
      c.steps = cfg.at("steps");
      c.hidden = cfg.at("hidden");
      c.blocks = cfg.at("blocks");
      c.dropout = cfg.at("dropout");
      nn::LstmNet net(c);
      nn::params_from_json(net, j.at("params"));
      return std::make_shared<LstmPredictor>(std::move(net),
                                             nn::Standardizer::from_json(j.at("scaler").at("features")),
                                             nn::Standardizer::from_json(j.at("scaler").at("target")));
    }
    if (kind == "ham") {
      nn::Mlp::Config c;
      c.input = cfg.at("input");
      c.hidden = cfg.at("hidden");
      c.dropout = cfg.at("dropout");
      nn::Mlp mlp(c);
      nn::params_from_json(mlp, j.at("params"));
      return std::make_shared<CostaModel>(plant_from_json(cfg.at("pbm")), std::move(mlp),
                                          nn::Standardizer::from_json(j.at("scaler").at("inputs")),
                                          j.at("scaler").at("residual_scale").get<double>());
    }
    throw ValidationError("unknown predictor kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const nlohmann::json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::shared_ptr<Predictor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return predictor_from_json(j);
}

}  // namespace llmctl
