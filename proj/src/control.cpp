#include "llmctl/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "llmctl/error.hpp"

namespace llmctl {

ControlInput ControlInput::from_steps(int heater_steps, bool fan_on) {
  if (heater_steps < 0 || heater_steps > kDutyGridSteps) {
    throw ValidationError("heater steps out of range: " + std::to_string(heater_steps));
  }
  ControlInput u;
  u.heater_steps_ = heater_steps;
  u.fan_on_ = fan_on;
  return u;
}

ControlInput ControlInput::exact(double heater_duty, int fan_on) {
  if (!std::isfinite(heater_duty)) throw ValidationError("heater duty is not finite");
  const double steps = heater_duty / kDutyStep;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 / kDutyStep) {
    throw ValidationError("heater duty " + std::to_string(heater_duty) + " is not on the 0.05 grid");
  }
  if (fan_on != 0 && fan_on != 1) {
    throw ValidationError("fan state must be 0 or 1");
  }
  return from_steps(static_cast<int>(rounded), fan_on == 1);
}

std::string ControlInput::to_string() const {
  char buf[48];
  std::snprintf(buf, sizeof buf, "(u_h=%.2f, fan=%s)", heater(), fan_on_ ? "ON" : "OFF");
  return buf;
}

SnappedControl snap_control(double heater_duty, double fan) {
  if (!std::isfinite(heater_duty)) throw ValidationError("heater duty is not finite");
  SnappedControl out;
  double duty = heater_duty;
  if (duty < 0.0 || duty > 1.0) {
    out.clamped = true;
    duty = std::clamp(duty, 0.0, 1.0);
  }
  const double steps = duty / kDutyStep;
  // Halfway points round toward the lower step.
  const int n = static_cast<int>(std::ceil(steps - 0.5 - 1e-9));
  out.snapped = std::abs(steps - n) > 1e-9;
  const bool fan_on = std::isfinite(fan) && fan >= 0.5;
  out.control = ControlInput::from_steps(std::clamp(n, 0, kDutyGridSteps), fan_on);
  return out;
}

}  // namespace llmctl
