#include "llmctl/plantsim.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace llmctl {

namespace {

template <class Rate>
double rk4(double T, double t0, double period, double dt, Rate&& rate) {
  const auto n = static_cast<long>(std::llround(period / dt));
  double t = t0;
  for (long k = 0; k < n; ++k) {
    const double k1 = rate(T, t);
    const double k2 = rate(T + 0.5 * dt * k1, t + 0.5 * dt);
    const double k3 = rate(T + 0.5 * dt * k2, t + 0.5 * dt);
    const double k4 = rate(T + dt * k3, t + dt);
    T += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += dt;
  }
  return T;
}

void check_sanity(double T) {
  if (!std::isfinite(T) || T < kSanityMin || T > kSanityMax) {
    throw PlantSanityError("temperature " + std::to_string(T) + " °C left the sanity band [-20, 80]");
  }
}

}  // namespace

PlantParams PlantParams::ideal() {
  PlantParams p;
  p.k_loss = 0.0;
  p.eta0 = 1.0;
  p.beta = 0.0;
  p.noise_sigma = 0.0;
  return p;
}

void PlantParams::validate(double period) const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("invalid plant parameter: ") + what);
  };
  require(rho > 0, "rho must be > 0");
  require(volume > 0, "V must be > 0");
  require(cp > 0, "Cp must be > 0");
  require(heater_max > 0, "Hmax must be > 0");
  require(fan_max > 0, "Fmax must be > 0");
  require(dt_int > 0, "dt_int must be > 0");
  require(eta0 > 0 && eta0 <= 1, "eta0 must lie in (0, 1]");
  require(k_loss >= 0, "k_loss must be >= 0");
  require(noise_sigma >= 0, "noise_sigma must be >= 0");
  require(std::isfinite(beta), "beta must be finite");
  const double ratio = period / dt_int;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1, "dt_int must divide the control period");
}

double Ambient::at(double t) const {
  if (amplitude == 0.0) return mean;
  return mean + amplitude * std::sin(2.0 * std::numbers::pi * t / period);
}

double pbm_rate(const PlantState& state, ControlInput u, const PlantParams& params) {
  return u.heater() * params.heater_gain() - u.fan_on() * params.fan_rate() * (state.T - state.T_amb);
}

double pbm_solve(double T0, double T_amb, ControlInput u, const PlantParams& params, double period,
                 double source) {
  const double heat = u.heater() * params.heater_gain() + source;
  const double fan = u.fan_on() * params.fan_rate();
  return rk4(T0, 0.0, period, params.dt_int,
             [&](double T, double) { return heat - fan * (T - T_amb); });
}

double pbm_source_gain(double T0, double T_amb, ControlInput u, const PlantParams& params, double period) {
  return pbm_solve(T0, T_amb, u, params, period, 1.0) - pbm_solve(T0, T_amb, u, params, period, 0.0);
}

double truth_rate(double T, double T_amb, ControlInput u, const PlantParams& params) {
  const double dT = T - T_amb;
  const double efficiency = params.eta0 * (1.0 - params.beta * dT);
  return efficiency * u.heater() * params.heater_gain() - u.fan_on() * params.fan_rate() * dT -
         params.k_loss * dT;
}

TruthStep truth_step(const PlantState& state, ControlInput u, const PlantParams& params,
                     const Ambient& ambient, double period, std::mt19937_64& rng) {
  params.validate(period);
  check_sanity(state.T);
  const double T_end = rk4(state.T, state.t, period, params.dt_int, [&](double T, double t) {
    return truth_rate(T, ambient.at(t), u, params);
  });
  check_sanity(T_end);
  TruthStep out;
  out.latent = {T_end, ambient.at(state.t + period), state.t + period};
  out.measured_T = T_end;
  if (params.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, params.noise_sigma);
    out.measured_T += noise(rng);
  }
  return out;
}

TruthPlant::TruthPlant(PlantParams params, Ambient ambient, double T0, std::uint64_t seed)
    : params_(params), ambient_(ambient), rng_(seed) {
  params_.validate();
  state_ = {T0, ambient_.at(0.0), 0.0};
  check_sanity(T0);
  measured_ = T0;
  if (params_.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, params_.noise_sigma);
    measured_ += noise(rng_);
  }
}

double TruthPlant::step(ControlInput u, double period) {
  const TruthStep s = truth_step(state_, u, params_, ambient_, period, rng_);
  state_ = s.latent;
  measured_ = s.measured_T;
  return measured_;
}

PlantConfig parse_plant_config(const std::string& text) {
  PlantConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    double value = 0;
    try {
      std::size_t used = 0;
      value = std::stod(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
    } catch (const std::exception&) {
      throw ValidationError("config line " + std::to_string(lineno) + ": bad number '" + raw + "'");
    }
    auto& p = cfg.params;
    if (key == "rho") p.rho = value;
    else if (key == "V") p.volume = value;
    else if (key == "Cp") p.cp = value;
    else if (key == "Hmax") p.heater_max = value;
    else if (key == "Fmax") p.fan_max = value;
    else if (key == "k_loss") p.k_loss = value;
    else if (key == "eta0") p.eta0 = value;
    else if (key == "beta") p.beta = value;
    else if (key == "noise_sigma") p.noise_sigma = value;
    else if (key == "dt_int") p.dt_int = value;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(value);
    else if (key == "T_amb") cfg.ambient.mean = value;
    else if (key == "T_amb_amplitude") cfg.ambient.amplitude = value;
    else if (key == "T_amb_period") cfg.ambient.period = value;
    else throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  cfg.params.validate();
  return cfg;
}

PlantConfig load_plant_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plant_config(ss.str());
}

}  // namespace llmctl
