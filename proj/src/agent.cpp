#include "llmctl/agent.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>

namespace llmctl {

namespace {

/// Shortest decimal text up to two places: 27.34, 27.1, 30.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s == "-0" ? "0" : s;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void PromptContext::validate() const {
  if (!std::isfinite(target) || !std::isfinite(current) || !std::isfinite(ambient)) {
    throw ValidationError("prompt temperatures must be finite");
  }
  if (tool == Assistance::SQL && guide_experiment.empty()) {
    throw ValidationError("the SQL variant needs a guide experiment id");
  }
}

std::string render_prompt(const PromptContext& ctx) {
  ctx.validate();
  std::string p = "What should the control values heater_duty_cycle and fan_on be set to in order to maintain a "
                  "temperature of " +
                  num(ctx.target) + " degrees? The temperature now is " + num(ctx.current) +
                  " and the ambient temperature is " + num(ctx.ambient) + " degrees.\n";
  if (ctx.penalty) {
    p += "The second priority is to match the target temperature accurately and the first priority is to have a "
         "minimal usage of the fan.";
  } else {
    p += "It is important that the temperature in the greenhouse matches the target temperature exactly.";
  }
  switch (ctx.tool) {
    case Assistance::None: break;
    case Assistance::SQL:
      p += " Use SQL database of earlier experiment titled \"" + ctx.guide_experiment + "\" as guide.";
      break;
    default: p += " Use " + std::string(to_string(ctx.tool)) + "."; break;
  }
  if (!ctx.objective.empty()) p += " " + ctx.objective;
  return p;
}

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::Plain: return "plain";
    case Architecture::Sql: return "sql";
    case Architecture::Predictive: return "predictive";
  }
  return "plain";
}

Architecture architecture_for(Assistance a) {
  if (a == Assistance::None) return Architecture::Plain;
  if (a == Assistance::SQL) return Architecture::Sql;
  return Architecture::Predictive;
}

std::string render_system_prompt(Architecture arch) {
  std::string s =
      "You control a small greenhouse with an electric heater and a ventilation fan. You decide the controls for "
      "the next 60 seconds.\n"
      "heater_duty_cycle is a fraction between 0 and 1 in steps of 0.05. fan_on is 0 (off) or 1 (on); the fan "
      "draws in ambient air and cools the greenhouse.\n";
  switch (arch) {
    case Architecture::Plain: break;
    case Architecture::Sql:
      s += "Use the query_history tool to look up the guide experiment, then its time series, before deciding. "
           "Tables:\n" +
           describe_history_schema() + "\n";
      break;
    case Architecture::Predictive:
      s += "Use the simulate tool to predict the temperature under candidate control sequences over the next "
           "minutes, compare the predictions with the target, then decide.\n";
      break;
  }
  s += "When done, call final_answer with heater_duty_cycle, fan_on, a brief rationale and the evidence you relied "
       "on. If you cannot call tools, answer with a line 'heater_duty_cycle: <value>, fan_on: <0|1>'.";
  return s;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Violation: return "violation";
    case Verdict::Fallback: return "fallback";
  }
  return "pass";
}

Verdict verdict_from_string(std::string_view s) {
  for (auto v : {Verdict::Pass, Verdict::Violation, Verdict::Fallback}) {
    if (s == to_string(v)) return v;
  }
  throw ValidationError("unknown verdict '" + std::string(s) + "'");
}

namespace {

nlohmann::json control_json(ControlInput u) { return {{"heater_duty_cycle", u.heater()}, {"fan_on", u.fan_on()}}; }

ControlInput control_from(const nlohmann::json& j) {
  return ControlInput::exact(j.at("heater_duty_cycle").get<double>(), j.at("fan_on").get<int>());
}

}  // namespace

nlohmann::json to_json(const DecisionCard& c) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : c.tool_log) {
    log.push_back({{"call_id", e.call_id}, {"tool", e.tool}, {"arguments", e.arguments}, {"result", e.result},
                   {"ok", e.ok}});
  }
  nlohmann::json j{{"tick", c.tick},
                   {"controller", c.controller},
                   {"prompt", c.prompt},
                   {"tool_log", log},
                   {"evidence", c.evidence},
                   {"decision", control_json(c.decision)},
                   {"proposed", c.proposed ? control_json(*c.proposed) : nlohmann::json()},
                   {"source", c.source},
                   {"verdict", to_string(c.verdict)},
                   {"rationale", c.rationale},
                   {"warnings", c.warnings},
                   {"duration_s", c.duration_s}};
  return j;
}

DecisionCard card_from_json(const nlohmann::json& j) {
  DecisionCard c;
  c.tick = j.at("tick").get<int>();
  c.controller = j.at("controller").get<std::string>();
  c.prompt = j.at("prompt").get<std::string>();
  for (const auto& e : j.at("tool_log")) {
    c.tool_log.push_back({e.at("call_id").get<std::string>(), e.at("tool").get<std::string>(), e.at("arguments"),
                          e.at("result"), e.at("ok").get<bool>()});
  }
  c.evidence = j.at("evidence").get<std::string>();
  c.decision = control_from(j.at("decision"));
  if (!j.at("proposed").is_null()) c.proposed = control_from(j["proposed"]);
  c.source = j.at("source").get<std::string>();
  c.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  c.rationale = j.at("rationale").get<std::string>();
  c.warnings = j.at("warnings").get<std::vector<std::string>>();
  c.duration_s = j.at("duration_s").get<double>();
  return c;
}

std::string render_card(const DecisionCard& c) {
  std::ostringstream os;
  os << "== " << c.controller << " tick " << c.tick << " [" << to_string(c.verdict) << "] ==\n";
  os << "Prompt:\n  " << c.prompt << "\n";
  os << "Tool use:\n";
  if (c.tool_log.empty()) os << "  (none)\n";
  for (const auto& e : c.tool_log) {
    os << "  " << e.tool << " " << e.arguments.dump() << (e.ok ? "" : "  -> FAILED") << "\n";
    if (e.result.contains("row_count")) {
      os << "    rows: " << e.result["row_count"] << "\n";
    } else if (e.result.contains("results")) {
      for (const auto& r : e.result["results"]) {
        os << "    (Heater=" << fmt2(r.value("heater_duty_cycle", 0.0)) << ", Fan=" << r.value("fan_on", 0)
           << ") -> " << fmt2(r.value("end_temperature", 0.0)) << "\n";
      }
    } else if (e.result.contains("error")) {
      os << "    error: " << e.result["error"].get<std::string>() << "\n";
    }
  }
  os << "Retrieved evidence:\n  " << c.evidence << "\n";
  os << "Controller decision:\n  Heater duty cycle: " << fmt2(c.decision.heater())
     << "  Fan: " << (c.decision.fan() ? "ON (1)" : "OFF (0)") << "  [" << c.source << "]\n";
  if (c.proposed && !(*c.proposed == c.decision)) {
    os << "  (rejected proposal: heater " << fmt2(c.proposed->heater()) << ", fan " << c.proposed->fan_on() << ")\n";
  }
  os << "Brief rationale:\n  " << c.rationale << "\n";
  for (const auto& w : c.warnings) os << "Warning: " << w << "\n";
  return os.str();
}

namespace {

ParsedDecision finish(double duty, double fan, const std::string& raw_duty) {
  if (!std::isfinite(duty)) throw DecisionParseError("heater duty '" + raw_duty + "' is not a number");
  const auto s = snap_control(duty, fan);
  ParsedDecision d{s.control, {}};
  if (s.clamped) d.warnings.push_back("heater duty " + raw_duty + " clamped to " + fmt2(s.control.heater()));
  else if (s.snapped) d.warnings.push_back("heater duty " + raw_duty + " snapped to " + fmt2(s.control.heater()));
  if (fan != 0 && fan != 1) d.warnings.push_back("fan value coerced to " + std::to_string(s.control.fan_on()));
  return d;
}

double json_number(const nlohmann::json& v, const char* key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "ON" || s == "on" || s == "true") return 1.0;
    if (s == "OFF" || s == "off" || s == "false") return 0.0;
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  throw DecisionParseError(std::string("final answer field '") + key + "' is not a number");
}

}  // namespace

ParsedDecision parse_decision(const nlohmann::json& arguments) {
  if (!arguments.is_object()) throw DecisionParseError("final answer arguments are not an object");
  if (!arguments.contains("heater_duty_cycle")) throw DecisionParseError("final answer lacks heater_duty_cycle");
  if (!arguments.contains("fan_on")) throw DecisionParseError("final answer lacks fan_on");
  const double duty = json_number(arguments["heater_duty_cycle"], "heater_duty_cycle");
  const double fan = json_number(arguments["fan_on"], "fan_on");
  return finish(duty, fan, arguments["heater_duty_cycle"].dump());
}

ParsedDecision parse_decision(const std::string& text) {
  static const std::regex duty_re(R"(heater[ _]duty[ _]cycle[^0-9+\-.a-zA-Z]{0,8}([-+]?[0-9]*\.?[0-9]+))",
                                  std::regex::icase);
  static const std::regex fan_re(R"(fan(?:[ _]on)?[^0-9a-zA-Z]{0,4}(on|off|1|0|true|false)\b)", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, duty_re)) throw DecisionParseError("no heater_duty_cycle value in the reply");
  const std::string raw = m[1];
  const double duty = std::stod(raw);
  if (!std::regex_search(text, m, fan_re)) throw DecisionParseError("no fan_on value in the reply");
  std::string f = m[1];
  for (auto& ch : f) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  const double fan = (f == "on" || f == "1" || f == "true") ? 1.0 : 0.0;
  return finish(duty, fan, raw);
}

bool cites_history(const std::string& text) {
  static const std::regex re(R"(histor|guide|past experiment|earlier experiment|previous experiment|database)",
                             std::regex::icase);
  return std::regex_search(text, re);
}

void AgentConfig::validate() const {
  if (max_rounds < 1) throw ValidationError("max tool rounds must be >= 1");
}

Verdict guard_evidence(const DecisionCard& card, Architecture arch) {
  switch (arch) {
    case Architecture::Plain: return Verdict::Pass;
    case Architecture::Sql: {
      if (!cites_history(card.rationale) && !cites_history(card.evidence)) return Verdict::Pass;
      for (const auto& e : card.tool_log) {
        if (e.tool != kQueryTool || !e.ok) continue;
        const std::string sql = e.arguments.value("sql", "");
        if (sql.find("timeseries_data") == std::string::npos) continue;
        if (e.result.value("row_count", 0) >= 1) return Verdict::Pass;
      }
      return Verdict::Violation;
    }
    case Architecture::Predictive:
      for (const auto& e : card.tool_log) {
        if (e.tool == kSimulateTool && e.ok) return Verdict::Pass;
      }
      return Verdict::Violation;
  }
  return Verdict::Violation;
}

Agent::Agent(AgentConfig cfg, std::shared_ptr<ChatBackend> backend, std::vector<std::shared_ptr<const AgentTool>> tools)
    : cfg_(cfg), backend_(std::move(backend)), tools_(std::move(tools)) {
  cfg_.validate();
  if (!backend_) throw ValidationError("agent needs a chat backend");
  for (const auto& t : tools_) schemas_.push_back(t->schema());
  schemas_.push_back(final_answer_schema());
  system_prompt_ = render_system_prompt(cfg_.architecture);
}

DecisionCard Agent::decide(const PromptContext& ctx, std::span<const StateSample> history, ControlInput previous) const {
  const auto started = std::chrono::steady_clock::now();
  DecisionCard card;
  card.prompt = render_prompt(ctx);
  card.decision = previous;

  std::vector<ChatMessage> conv{ChatMessage::system(system_prompt_), ChatMessage::user(card.prompt)};
  const ToolContext tctx{history};
  std::optional<ParsedDecision> parsed;
  std::string failure;

  try {
    for (int call = 0; call <= cfg_.max_rounds && !parsed && failure.empty(); ++call) {
      ChatMessage reply = backend_->chat(conv, schemas_);
      conv.push_back(reply);

      const ToolCall* final_call = nullptr;
      for (const auto& tc : reply.tool_calls) {
        if (tc.name == kFinalAnswerTool) final_call = &tc;
      }
      if (final_call) {
        parsed = parse_decision(final_call->arguments);
        card.rationale = final_call->arguments.value("rationale", "");
        card.evidence = final_call->arguments.value("evidence", "");
        break;
      }
      if (reply.tool_calls.empty()) {
        parsed = parse_decision(reply.content);
        card.rationale = reply.content;
        break;
      }
      for (const auto& tc : reply.tool_calls) {
        if (card.tool_log.size() >= static_cast<std::size_t>(cfg_.max_rounds)) {
          failure = "tool round limit (" + std::to_string(cfg_.max_rounds) + ") reached without a decision";
          break;
        }
        ToolLogEntry entry{tc.id, tc.name, tc.arguments, {}, false};
        const AgentTool* tool = nullptr;
        for (const auto& t : tools_) {
          if (t->schema().name == tc.name) tool = t.get();
        }
        if (tool) {
          const auto out = tool->call(tc.arguments, tctx);
          entry.ok = out.ok;
          entry.result = out.result;
        } else {
          entry.result = {{"error", "unknown tool '" + tc.name + "'"}};
        }
        conv.push_back(ChatMessage::tool(tc.id, entry.result.dump()));
        card.tool_log.push_back(std::move(entry));
      }
      if (failure.empty() && call == cfg_.max_rounds) {
        failure = "tool round limit (" + std::to_string(cfg_.max_rounds) + ") reached without a decision";
      }
    }
  } catch (const BackendError& e) {
    failure = std::string("backend failure: ") + e.what();
  } catch (const DecisionParseError& e) {
    failure = std::string("unparseable decision: ") + e.what();
  } catch (const ValidationError& e) {
    failure = std::string("invalid exchange: ") + e.what();
  }

  if (!parsed && failure.empty()) failure = "no decision";
  if (card.evidence.empty()) card.evidence = "none";

  if (!failure.empty()) {
    card.verdict = Verdict::Fallback;
    card.source = "fallback";
    card.decision = previous;
    card.warnings.push_back(failure);
    card.rationale = "Fallback: " + failure + "; holding the previous controls.";
  } else {
    card.proposed = parsed->control;
    card.warnings = parsed->warnings;
    if (card.rationale.empty()) card.rationale = "(no rationale given)";
    card.verdict = cfg_.guardrail ? guard_evidence(card, cfg_.architecture) : Verdict::Pass;
    if (card.verdict == Verdict::Pass) {
      card.decision = parsed->control;
      card.source = "assistant";
    } else {
      card.decision = previous;
      card.source = "fallback";
      card.warnings.push_back(cfg_.architecture == Architecture::Sql
                                  ? "guardrail: decision cites history but no time-series rows were retrieved"
                                  : "guardrail: no prediction was completed before deciding");
    }
  }
  card.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return card;
}

}  // namespace llmctl
