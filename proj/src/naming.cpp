#include "llmctl/naming.hpp"

#include <charconv>
#include <cmath>
#include <regex>

namespace llmctl {

std::string_view to_string(Assistance a) {
  switch (a) {
    case Assistance::None: return "none";
    case Assistance::SQL: return "SQL";
    case Assistance::Linear: return "Linear";
    case Assistance::LSTM: return "LSTM";
    case Assistance::HAM: return "HAM";
  }
  return "none";
}

std::optional<Assistance> assistance_from_tag(std::string_view tag) {
  for (auto a : {Assistance::SQL, Assistance::Linear, Assistance::LSTM, Assistance::HAM}) {
    if (tag == to_string(a)) return a;
  }
  return std::nullopt;
}

bool is_predictive(Assistance a) {
  return a == Assistance::Linear || a == Assistance::LSTM || a == Assistance::HAM;
}

ControllerName parse_controller_name(std::string_view text) {
  static const std::regex shape(R"(^LLM(?:-([A-Za-z0-9]+))?-Te([0-9]+(?:\.[0-9]+)?)(-P)?$)");
  const std::string s(text);
  std::smatch m;
  if (!std::regex_match(s, m, shape)) {
    throw NameError("invalid controller name '" + s +
                    "': expected LLM[-SQL|-Linear|-LSTM|-HAM]-Te<temperature>[-P], e.g. LLM-HAM-Te0-P");
  }
  ControllerName out;
  if (m[1].matched) {
    const auto a = assistance_from_tag(m[1].str());
    if (!a) {
      throw NameError("unknown assistance '" + m[1].str() + "' in '" + s +
                      "': use one of SQL, Linear, LSTM, HAM or omit it for the plain controller");
    }
    out.assistance = *a;
  }
  const std::string te = m[2].str();
  // Canonical numbers only, so that render(parse(s)) == s.
  const bool leading_zero = te.size() > 1 && te[0] == '0' && te[1] != '.';
  const bool trailing_zero = te.find('.') != std::string::npos && te.back() == '0';
  if (leading_zero || trailing_zero) {
    throw NameError("temperature '" + te + "' in '" + s + "' is not in shortest form (write e.g. Te0, Te0.5)");
  }
  out.te = std::stod(te);
  out.penalty = m[3].matched;
  return out;
}

std::string render_controller_name(const ControllerName& name) {
  if (!std::isfinite(name.te) || name.te < 0) throw NameError("temperature must be a finite value >= 0");
  std::string out = "LLM";
  if (name.assistance != Assistance::None) out += "-" + std::string(to_string(name.assistance));
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, name.te, std::chars_format::fixed);
  std::string te(buf, r.ptr);
  out += "-Te" + te;
  if (name.penalty) out += "-P";
  return out;
}

std::vector<ControllerName> all_variants(std::vector<double> temperatures) {
  std::vector<ControllerName> out;
  for (auto a : {Assistance::None, Assistance::SQL, Assistance::Linear, Assistance::LSTM, Assistance::HAM}) {
    for (double te : temperatures) {
      for (bool p : {false, true}) out.push_back({a, te, p});
    }
  }
  return out;
}

}  // namespace llmctl
