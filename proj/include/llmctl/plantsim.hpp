#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "llmctl/control.hpp"
#include "llmctl/error.hpp"

namespace llmctl {

inline constexpr double kControlPeriod = 60.0;  // s
inline constexpr double kSanityMin = -20.0;     // °C
inline constexpr double kSanityMax = 80.0;      // °C

/// Physical and mismatch parameters of the greenhouse twin.
struct PlantParams {
  double rho = 1.2;            // air density, kg/m^3
  double volume = 0.15;        // m^3 (50 x 50 x 60 cm)
  double cp = 1005.0;          // J/(kg K)
  double heater_max = 100.0;   // W
  double fan_max = 68.0;       // m^3/h
  double k_loss = 0.01;        // wall loss, 1/s (truth only)
  double eta0 = 0.35;          // heater efficiency (truth only)
  double beta = 0.004;         // efficiency droop, 1/K (truth only)
  double noise_sigma = 0.05;   // measurement noise, °C (truth only)
  double dt_int = 1.0;         // RK4 sub-step, s

  /// Truth parameters that make the plant identical to the physics model.
  static PlantParams ideal();

  /// Throws ValidationError naming the first broken invariant.
  void validate(double period = kControlPeriod) const;

  double heater_gain() const { return heater_max / (rho * volume * cp); }  // °C/s at full duty
  double fan_rate() const { return fan_max / 3600.0 / volume; }           // 1/s
};

/// Ambient temperature: constant mean plus an optional slow sinusoid.
struct Ambient {
  double mean = 22.6;
  double amplitude = 0.0;
  double period = 86400.0;  // s

  double at(double t) const;
};

struct PlantState {
  double T = 22.6;      // inside temperature, °C
  double T_amb = 22.6;  // ambient, °C
  double t = 0.0;       // s
};

class PlantSanityError : public Error {
 public:
  using Error::Error;
};

/// Idealized physics model rate (no corrective term), °C/s.
double pbm_rate(const PlantState& state, ControlInput u, const PlantParams& params);

/// Integrates the physics model over `period` from T0 with constant ambient
/// and an additional constant source term `source` (°C/s), RK4 sub-stepped
/// at params.dt_int.
double pbm_solve(double T0, double T_amb, ControlInput u, const PlantParams& params,
                 double period = kControlPeriod, double source = 0.0);

/// Sensitivity of pbm_solve's end temperature to a unit constant source.
/// The integrator is affine in the source, so this is exact up to rounding.
double pbm_source_gain(double T0, double T_amb, ControlInput u, const PlantParams& params,
                       double period = kControlPeriod);

/// Rate of the synthetic "true" plant (wall loss and heater droop).
double truth_rate(double T, double T_amb, ControlInput u, const PlantParams& params);

struct TruthStep {
  PlantState latent;
  double measured_T;
};

/// Advances the truth plant by `period` with RK4 sub-steps; measurement noise
/// is applied to the reported temperature only. Throws PlantSanityError when
/// the latent temperature leaves [-20, 80] °C.
TruthStep truth_step(const PlantState& state, ControlInput u, const PlantParams& params,
                     const Ambient& ambient, double period, std::mt19937_64& rng);

/// Stateful wrapper owning latent state and noise source for one simulation.
class TruthPlant {
 public:
  TruthPlant(PlantParams params, Ambient ambient, double T0, std::uint64_t seed);

  /// Current noisy measurement (drawn once per state).
  double measured() const { return measured_; }
  const PlantState& latent() const { return state_; }
  const PlantParams& params() const { return params_; }
  const Ambient& ambient() const { return ambient_; }

  double step(ControlInput u, double period = kControlPeriod);

 private:
  PlantParams params_;
  Ambient ambient_;
  PlantState state_;
  std::mt19937_64 rng_;
  double measured_;
};

struct PlantConfig {
  PlantParams params;
  Ambient ambient;
  std::uint64_t seed = 42;
};

/// Reads `key = value` lines (`#` comments). Keys: rho, V, Cp, Hmax, Fmax,
/// k_loss, eta0, beta, noise_sigma, dt_int, seed, T_amb, T_amb_amplitude,
/// T_amb_period. Unknown keys are an error.
PlantConfig load_plant_config(const std::filesystem::path& path);
PlantConfig parse_plant_config(const std::string& text);

}  // namespace llmctl
