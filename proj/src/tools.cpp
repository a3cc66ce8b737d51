#include "llmctl/tools.hpp"

#include <algorithm>
#include <cmath>

namespace llmctl {

namespace {

nlohmann::json error(const std::string& what) { return {{"error", what}}; }

nlohmann::json value_json(const sql::Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<double>(v);
}

ControlInput control_arg(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("each control must be an object");
  const auto num = [&](const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("missing ") + key);
    const auto& v = j[key];
    if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
    if (!v.is_number()) throw ValidationError(std::string(key) + " must be a number");
    return v.get<double>();
  };
  return snap_control(num("heater_duty_cycle"), num("fan_on")).control;
}

nlohmann::json control_schema() {
  return {{"type", "object"},
          {"properties",
           {{"heater_duty_cycle", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}},
            {"fan_on", {{"type", "integer"}, {"enum", {0, 1}}}}}},
          {"required", {"heater_duty_cycle", "fan_on"}}};
}

}  // namespace

QueryHistoryTool::QueryHistoryTool(std::shared_ptr<const HistoryStore> store) : store_(std::move(store)) {
  if (!store_) throw ValidationError("query tool needs a history store");
}

ToolSchema QueryHistoryTool::schema() const {
  return {kQueryTool,
          "Run one read-only SQL query against the experiment history.\n" + describe_history_schema(),
          {{"type", "object"},
           {"properties", {{"sql", {{"type", "string"}, {"description", "a single SELECT statement"}}}}},
           {"required", {"sql"}}}};
}

ToolOutcome QueryHistoryTool::call(const nlohmann::json& arguments, const ToolContext&) const {
  if (!arguments.is_object() || !arguments.contains("sql") || !arguments["sql"].is_string()) {
    return {false, error("argument 'sql' (string) is required")};
  }
  try {
    const auto table = store_->query(arguments["sql"].get<std::string>());
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows) {
      nlohmann::json row = nlohmann::json::array();
      for (const auto& v : r) row.push_back(value_json(v));
      rows.push_back(std::move(row));
    }
    return {true, {{"columns", table.columns}, {"rows", rows}, {"row_count", table.rows.size()}}};
  } catch (const sql::SqlError& e) {
    return {false, {{"error", e.message()}, {"offset", e.offset()}}};
  }
}

SimulateTool::SimulateTool(std::shared_ptr<const Predictor> predictor) : predictor_(std::move(predictor)) {
  if (!predictor_) throw ValidationError("simulate tool needs a predictor");
}

ToolSchema SimulateTool::schema() const {
  return {kSimulateTool,
          "Predict the greenhouse temperature with the " + std::string(predictor_->kind()) +
              " model for candidate control sequences, starting from the current state. Each step lasts 60 s.",
          {{"type", "object"},
           {"properties",
            {{"candidates", {{"type", "array"}, {"items", control_schema()},
                             {"description", "controls held constant over the horizon"}}},
             {"sequences", {{"type", "array"}, {"items", {{"type", "array"}, {"items", control_schema()}}},
                            {"description", "explicit per-step controls; shorter ones hold their last value"}}},
             {"horizon", {{"type", "integer"}, {"minimum", 1}, {"default", kDefaultHorizon}}}}}}};
}

nlohmann::json simulate_tool(const Predictor& predictor, std::span<const StateSample> history,
                             std::span<const ControlSequence> sequences, int horizon) {
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  std::vector<ControlSequence> padded(sequences.begin(), sequences.end());
  for (auto& s : padded) {
    if (s.empty()) throw ValidationError("empty control sequence");
    s.resize(static_cast<std::size_t>(horizon), s.back());
  }
  const auto trajs = rollout_batch(predictor, history, padded);
  nlohmann::json results = nlohmann::json::array();
  for (std::size_t k = 0; k < padded.size(); ++k) {
    nlohmann::json r{{"heater_duty_cycle", padded[k].front().heater()},
                     {"fan_on", padded[k].front().fan_on()},
                     {"end_temperature", trajs[k].end_temperature()},
                     {"trajectory", trajs[k].temps}};
    const bool constant = std::all_of(padded[k].begin(), padded[k].end(),
                                      [&](const ControlInput& u) { return u == padded[k].front(); });
    if (!constant) {
      nlohmann::json steps = nlohmann::json::array();
      for (const auto& u : padded[k]) steps.push_back({{"heater_duty_cycle", u.heater()}, {"fan_on", u.fan_on()}});
      r["sequence"] = steps;
    }
    results.push_back(std::move(r));
  }
  return {{"predictor", predictor.kind()}, {"horizon", horizon}, {"results", results}};
}

ToolOutcome SimulateTool::call(const nlohmann::json& arguments, const ToolContext& ctx) const {
  try {
    if (!arguments.is_object()) throw ValidationError("arguments must be an object");
    const int horizon = arguments.value("horizon", kDefaultHorizon);
    std::vector<ControlSequence> seqs;
    if (arguments.contains("candidates")) {
      for (const auto& c : arguments["candidates"]) seqs.push_back(ControlSequence{control_arg(c)});
    }
    if (arguments.contains("sequences")) {
      for (const auto& s : arguments["sequences"]) {
        ControlSequence seq;
        for (const auto& c : s) seq.push_back(control_arg(c));
        if (seq.empty()) throw ValidationError("empty sequence");
        if (seq.size() > static_cast<std::size_t>(horizon)) throw ValidationError("sequence longer than the horizon");
        seqs.push_back(std::move(seq));
      }
    }
    if (seqs.empty()) throw ValidationError("give at least one entry in 'candidates' or 'sequences'");
    if (seqs.size() > kMaxSimulateCandidates) {
      throw ValidationError("at most " + std::to_string(kMaxSimulateCandidates) + " sequences per call");
    }
    if (horizon < 1 || horizon > 120) throw ValidationError("horizon must be between 1 and 120");
    return {true, simulate_tool(*predictor_, ctx.history, seqs, horizon)};
  } catch (const nlohmann::json::exception& e) {
    return {false, error(std::string("bad arguments: ") + e.what())};
  } catch (const Error& e) {
    return {false, error(e.what())};
  }
}

ToolSchema final_answer_schema() {
  return {kFinalAnswerTool,
          "Submit the control decision for this minute. Call exactly once when done.",
          {{"type", "object"},
           {"properties",
            {{"heater_duty_cycle", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}},
             {"fan_on", {{"type", "integer"}, {"enum", {0, 1}}}},
             {"rationale", {{"type", "string"}, {"description", "one or two sentences"}}},
             {"evidence", {{"type", "string"}, {"description", "the retrieved rows or predictions relied on"}}}}},
           {"required", {"heater_duty_cycle", "fan_on", "rationale"}}}};
}

}  // namespace llmctl
