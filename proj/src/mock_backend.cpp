#include "llmctl/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <regex>

namespace llmctl {

void MockPolicy::validate() const {
  if (candidate_steps.empty()) throw ValidationError("mock policy needs at least one candidate");
  for (int s : candidate_steps) {
    if (s < 0 || s > kDutyGridSteps) throw ValidationError("mock candidate off the duty grid");
  }
  if (horizon < 1) throw ValidationError("mock horizon must be >= 1");
  if (refine_radius < 0) throw ValidationError("refine radius must be >= 0");
  if (!(penalty_weight >= 0)) throw ValidationError("penalty weight must be >= 0");
}

ControlInput mock_select(std::span<const CandidateOutcome> candidates, double target, double lambda) {
  const CandidateOutcome* best = nullptr;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (!std::isfinite(c.end_temperature)) continue;
    const double cost = std::abs(c.end_temperature - target) + lambda * c.u.fan_on();
    const bool better = !best || cost < best_cost ||
                        (cost == best_cost && std::pair(c.u.heater_steps(), c.u.fan_on()) <
                                                  std::pair(best->u.heater_steps(), best->u.fan_on()));
    if (better) {
      best = &c;
      best_cost = cost;
    }
  }
  if (!best) throw ValidationError("mock_select needs at least one candidate with a finite prediction");
  return best->u;
}

PromptReading read_prompt(const std::string& prompt) {
  static const std::regex target(R"(maintain a temperature of \$?(-?[0-9]+(?:\.[0-9]+)?))");
  static const std::regex current(R"(temperature now is \$?(-?[0-9]+(?:\.[0-9]+)?))");
  static const std::regex ambient(R"(ambient temperature is \$?(-?[0-9]+(?:\.[0-9]+)?))");
  static const std::regex guide(R"(titled [`'"“]([^`'"”]+)[`'"”])");
  PromptReading r;
  std::smatch m;
  if (!std::regex_search(prompt, m, target)) throw ValidationError("prompt does not state a target temperature");
  r.target = std::stod(m[1]);
  if (!std::regex_search(prompt, m, current)) throw ValidationError("prompt does not state the current temperature");
  r.current = std::stod(m[1]);
  if (!std::regex_search(prompt, m, ambient)) throw ValidationError("prompt does not state the ambient temperature");
  r.ambient = std::stod(m[1]);
  r.penalty = prompt.find("minimal usage of the fan") != std::string::npos;
  if (std::regex_search(prompt, m, guide)) r.guide_experiment = m[1];
  return r;
}

namespace {

bool has_tool(const std::vector<ToolSchema>& tools, const char* name) {
  return std::any_of(tools.begin(), tools.end(), [&](const ToolSchema& t) { return t.name == name; });
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Messages after the last user prompt.
struct Turn {
  const ChatMessage* prompt = nullptr;
  std::vector<const ChatMessage*> tool_results;
  int assistant_turns = 0;
};

Turn current_turn(const std::vector<ChatMessage>& messages) {
  Turn t;
  for (const auto& m : messages) {
    if (m.role == Role::User) {
      t = Turn{};
      t.prompt = &m;
    } else if (m.role == Role::Tool) {
      t.tool_results.push_back(&m);
    } else if (m.role == Role::Assistant) {
      ++t.assistant_turns;
    }
  }
  if (!t.prompt) throw ValidationError("conversation has no user prompt");
  return t;
}

nlohmann::json parse_result(const ChatMessage* m) {
  try {
    return nlohmann::json::parse(m->content);
  } catch (const nlohmann::json::exception&) {
    return nlohmann::json{{"error", "unreadable tool result"}};
  }
}

std::string call_id(const Turn& t) { return "call_" + std::to_string(t.assistant_turns + 1); }

ChatMessage answer(const Turn& t, const std::vector<ToolSchema>& tools, ControlInput u, const std::string& rationale,
                   const std::string& evidence) {
  const std::string text = "heater_duty_cycle: " + fmt2(u.heater()) + ", fan_on: " + std::to_string(u.fan_on()) +
                           "\nRationale: " + rationale;
  if (!has_tool(tools, kFinalAnswerTool)) return ChatMessage::assistant(text);
  return ChatMessage::assistant("", {ToolCall{call_id(t), kFinalAnswerTool,
                                              {{"heater_duty_cycle", u.heater()},
                                               {"fan_on", u.fan_on()},
                                               {"rationale", rationale},
                                               {"evidence", evidence}}}});
}

ControlInput snap(double heater, bool fan) { return ControlInput::from_steps(snap_control(heater, 0).control.heater_steps(), fan); }

/// Feed-forward duty for the lossless model plus a proportional correction.
ControlInput heuristic(const PromptReading& p) {
  const double steady = (p.target - p.ambient) / 18.0;
  const double u = steady + 0.05 * (p.target - p.current);
  const bool fan = !p.penalty && p.current > p.target + 0.5;
  return snap(std::clamp(u, 0.0, 1.0), fan);
}

nlohmann::json simulate_args(const std::vector<ControlInput>& cands, int horizon) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& u : cands) arr.push_back({{"heater_duty_cycle", u.heater()}, {"fan_on", u.fan_on()}});
  return {{"candidates", arr}, {"horizon", horizon}};
}

std::vector<CandidateOutcome> collect_outcomes(const Turn& t, bool& any_ok) {
  std::vector<CandidateOutcome> out;
  any_ok = false;
  for (const auto* m : t.tool_results) {
    const auto j = parse_result(m);
    if (!j.contains("results") || !j["results"].is_array()) continue;
    any_ok = true;
    for (const auto& r : j["results"]) {
      const auto u = snap_control(r.value("heater_duty_cycle", 0.0), r.value("fan_on", 0)).control;
      out.push_back({u, r.value("end_temperature", std::numeric_limits<double>::quiet_NaN())});
    }
  }
  return out;
}

ChatMessage predictive(const MockPolicy& pol, const Turn& t, const PromptReading& p,
                       const std::vector<ToolSchema>& tools) {
  const double lambda = p.penalty ? pol.penalty_weight : 0.0;
  const std::size_t rounds = t.tool_results.size();
  bool any_ok = false;
  const auto outcomes = collect_outcomes(t, any_ok);

  if (rounds == 0) {
    std::vector<ControlInput> cands;
    for (bool fan : {false, true}) {
      if (fan && !pol.fan_candidates) break;
      for (int s : pol.candidate_steps) cands.push_back(ControlInput::from_steps(s, fan));
    }
    return ChatMessage::assistant("Evaluating constant control sequences.",
                                  {ToolCall{call_id(t), kSimulateTool, simulate_args(cands, pol.horizon)}});
  }
  if (rounds == 1 && pol.refine && any_ok) {
    // Refine around the best coarse candidate of each fan state separately,
    // so a penalised fan state still gets a fine search.
    std::vector<ControlInput> cands;
    std::string around;
    for (bool fan : {false, true}) {
      if (fan && !pol.fan_candidates) break;
      std::vector<CandidateOutcome> same;
      std::copy_if(outcomes.begin(), outcomes.end(), std::back_inserter(same), [&](const CandidateOutcome& o) {
        return o.u.fan() == fan && std::isfinite(o.end_temperature);
      });
      if (same.empty()) continue;
      const auto best = mock_select(same, p.target, 0.0);
      const int lo = std::max(0, best.heater_steps() - pol.refine_radius);
      const int hi = std::min(kDutyGridSteps, best.heater_steps() + pol.refine_radius);
      for (int s = lo; s <= hi; ++s) cands.push_back(ControlInput::from_steps(s, fan));
      around += (around.empty() ? "" : " and ") + fmt2(best.heater()) + (fan ? " (fan on)" : " (fan off)");
    }
    if (!cands.empty()) {
      return ChatMessage::assistant("Refining around heater " + around + ".",
                                    {ToolCall{call_id(t), kSimulateTool, simulate_args(cands, pol.horizon)}});
    }
  }
  if (!any_ok) {
    // No usable predictions: answer anyway, as an unsupported model would.
    return answer(t, tools, heuristic(p), "Predictions were unavailable; chose a duty cycle from experience.",
                  "none");
  }
  const auto u = mock_select(outcomes, p.target, lambda);
  double end = 0;
  for (const auto& o : outcomes) {
    if (o.u == u) end = o.end_temperature;
  }
  const std::string ev = "(Heater=" + fmt2(u.heater()) + ", Fan=" + std::to_string(u.fan_on()) +
                         ") gave a predicted end temperature of " + fmt2(end) + " closest to " + fmt2(p.target) +
                         " among " + std::to_string(outcomes.size()) + " evaluated sequences.";
  std::string why = "Chose the evaluated constant sequence whose end-of-horizon prediction best matches the target";
  why += p.penalty ? ", with each fan-on candidate penalised." : ".";
  return answer(t, tools, u, why, ev);
}

ChatMessage sql(const Turn& t, const PromptReading& p, const std::vector<ToolSchema>& tools) {
  const auto hallucinate = [&](const std::string& what) {
    // Mirrors an unsupported answer that still claims a historical basis.
    return answer(t, tools, ControlInput::from_steps(15, true),
                  "Based on historical data from the guide experiment, similar settings kept the temperature near "
                  "the target.",
                  what);
  };
  if (t.tool_results.empty()) {
    if (p.guide_experiment.empty()) return hallucinate("No guide experiment named.");
    return ChatMessage::assistant(
        "Looking up the guide experiment window.",
        {ToolCall{call_id(t), kQueryTool,
                  {{"sql", "SELECT StartTime, EndTime FROM experiments WHERE ExperimentID = '" + p.guide_experiment +
                               "';"}}}});
  }
  const auto first = parse_result(t.tool_results.front());
  if (t.tool_results.size() == 1) {
    if (first.contains("error") || first.value("row_count", 0) < 1) {
      return hallucinate("No time-series evidence gathered for the specified window.");
    }
    const auto& row = first["rows"][0];
    return ChatMessage::assistant(
        "Retrieving the guide time series.",
        {ToolCall{call_id(t), kQueryTool,
                  {{"sql", "SELECT Temperature, HeaterDutyCycle, FanOn FROM timeseries_data WHERE MeasurementTime "
                           "BETWEEN '" +
                               row[0].get<std::string>() + "' AND '" + row[1].get<std::string>() + "';"}}}});
  }
  const auto second = parse_result(t.tool_results[1]);
  if (second.contains("error") || second.value("row_count", 0) < 1) {
    return hallucinate("No time-series evidence gathered for the specified window.");
  }
  struct Row {
    double T, u;
    int fan;
  };
  std::vector<Row> all;
  for (const auto& r : second["rows"]) all.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<int>()});
  // Rows come back in time order; rows mid-transient say little about what
  // holds a temperature, so keep the quasi-steady ones when there are any.
  std::vector<Row> rows;
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    if (std::abs(all[i + 1].T - all[i].T) < 0.15) rows.push_back(all[i]);
  }
  if (rows.empty()) rows = all;
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const Row& a, const Row& b) { return std::abs(a.T - p.target) < std::abs(b.T - p.target); });
  const std::size_t n = std::min<std::size_t>(rows.size(), 10);
  double duty = 0;
  int fans = 0;
  for (std::size_t i = 0; i < n; ++i) {
    duty += rows[i].u;
    fans += rows[i].fan;
  }
  duty /= static_cast<double>(n);
  const bool fan = !p.penalty && 2 * fans > static_cast<int>(n);
  const auto u = snap(std::clamp(duty + 0.1 * (p.target - p.current), 0.0, 1.0), fan);
  std::string ev = std::to_string(n) + " steady guide rows nearest " + fmt2(p.target) + " C, e.g.";
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 3); ++i) {
    ev += " (" + fmt2(rows[i].T) + ", " + fmt2(rows[i].u) + ", " + std::to_string(rows[i].fan) + ")";
  }
  return answer(t, tools, u,
                "Guide rows near the target held it with a mean duty of " + fmt2(duty) +
                    "; adjusted for the current offset of " + fmt2(p.target - p.current) + " C.",
                ev);
}

}  // namespace

MockBackend::MockBackend(MockPolicy policy) : policy_(std::move(policy)) { policy_.validate(); }

ChatMessage MockBackend::chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) {
  validate_conversation(messages);
  const Turn t = current_turn(messages);
  const PromptReading p = read_prompt(t.prompt->content);
  if (has_tool(tools, kSimulateTool)) return predictive(policy_, t, p, tools);
  if (has_tool(tools, kQueryTool)) return sql(t, p, tools);
  return answer(t, tools, heuristic(p),
                "Feed-forward duty for the target rise over ambient plus a proportional correction.",
                "target " + fmt2(p.target) + ", current " + fmt2(p.current) + ", ambient " + fmt2(p.ambient));
}

ScriptedBackend::ScriptedBackend(std::vector<ChatMessage> script) : script_(std::move(script)) {
  if (script_.empty()) throw ValidationError("script must hold at least one reply");
}

ChatMessage ScriptedBackend::chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>&) {
  validate_conversation(messages);
  const std::size_t k = static_cast<std::size_t>(current_turn(messages).assistant_turns);
  return script_[std::min(k, script_.size() - 1)];
}

ChatMessage FailingBackend::chat(const std::vector<ChatMessage>&, const std::vector<ToolSchema>&) {
  switch (mode_) {
    case Mode::Timeout: throw TimeoutError("backend timed out");
    case Mode::Malformed: throw MalformedReplyError("backend reply was malformed");
    case Mode::Transport: break;
  }
  throw TransportError("backend unreachable");
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg, const MockPolicy& policy) {
  cfg.validate();
  if (cfg.kind == BackendKind::Remote) return std::make_unique<RemoteBackend>(cfg);
  return std::make_unique<MockBackend>(policy);
}

}  // namespace llmctl
