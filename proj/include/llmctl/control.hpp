#pragma once

#include <compare>
#include <string>

namespace llmctl {

inline constexpr double kDutyStep = 0.05;
inline constexpr int kDutyGridSteps = 20;

/// Actuator command: heater duty on the 0.05 grid plus a binary fan.
/// The duty is held as an integer step count so an off-grid value cannot be
/// represented.
class ControlInput {
 public:
  constexpr ControlInput() = default;

  /// Throws ValidationError when steps are outside [0, 20].
  static ControlInput from_steps(int heater_steps, bool fan_on);

  /// Accepts only values that already lie on the grid (within 1e-9).
  static ControlInput exact(double heater_duty, int fan_on);

  constexpr int heater_steps() const { return heater_steps_; }
  constexpr double heater() const { return heater_steps_ / static_cast<double>(kDutyGridSteps); }
  constexpr bool fan() const { return fan_on_; }
  constexpr int fan_on() const { return fan_on_ ? 1 : 0; }

  std::string to_string() const;

  friend constexpr auto operator<=>(const ControlInput&, const ControlInput&) = default;

 private:
  int heater_steps_ = 0;
  bool fan_on_ = false;
};

struct SnappedControl {
  ControlInput control;
  bool clamped = false;  // raw duty was outside [0, 1]
  bool snapped = false;  // raw duty was off the grid
};

/// Maps arbitrary numbers onto the actuator grid: clamps the duty to [0, 1],
/// rounds to the nearest 0.05 step (exact halves go down) and coerces the fan
/// to 0/1 (anything >= 0.5 is on). Non-finite duty throws ValidationError.
SnappedControl snap_control(double heater_duty, double fan);

}  // namespace llmctl
