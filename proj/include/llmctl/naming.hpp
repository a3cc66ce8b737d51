#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmctl/error.hpp"

namespace llmctl {

enum class Assistance { None, SQL, Linear, LSTM, HAM };

std::string_view to_string(Assistance a);
/// "SQL", "Linear", "LSTM", "HAM"; nullopt otherwise ("none" is not a tag).
std::optional<Assistance> assistance_from_tag(std::string_view tag);
bool is_predictive(Assistance a);

/// LLM[-Assistance]-Te<tau>[-P], e.g. "LLM-HAM-Te0-P".
struct ControllerName {
  Assistance assistance = Assistance::None;
  double te = 0.0;
  bool penalty = false;

  bool operator==(const ControllerName&) const = default;
};

class NameError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Throws NameError with a hint on anything that is not a valid name.
ControllerName parse_controller_name(std::string_view text);
/// Shortest decimal form of te ("Te0", "Te0.7").
std::string render_controller_name(const ControllerName& name);

/// Every combination of assistance, Te in {0, 1} and penalty.
std::vector<ControllerName> all_variants(std::vector<double> temperatures = {0.0, 1.0});

}  // namespace llmctl
