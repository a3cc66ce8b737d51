#include <doctest.h>

#include <random>

#include "llmctl/agent.hpp"

using namespace llmctl;

namespace {

const char* kGuideId = "MPC control_penalty2025-03-01T12:41:30";
const char* kSql1 =
    "SELECT StartTime, EndTime \nFROM experiments \nWHERE ExperimentID = 'MPC control_penalty2025-03-01T12:41:30';";
const char* kSql2 =
    "SELECT Temperature, HeaterDutyCycle, FanOn\nFROM timeseries_data\nWHERE MeasurementTime\n"
    "BETWEEN `2025-03-01 12:45:58' AND `2025-03-01 18:44:58';";

std::shared_ptr<HistoryStore> guide_store() {
  auto store = std::make_shared<HistoryStore>();
  std::vector<RunTick> ticks;
  const EpochSeconds t0 = parse_timestamp("2025-03-01 12:45:58");
  for (int k = 0; k < 360; ++k) {
    ticks.push_back({t0 + 60 * k, 25.8 + 0.015 * k, ControlInput::from_steps(k % 21, false), 22.6});
  }
  store->ingest_run(kGuideId, "MPC control_penalty", ticks);
  return store;
}

PromptContext reference_context() {
  return {27.34, 27.1, 22.6, true, Assistance::SQL, kGuideId, ""};
}

std::vector<StateSample> state(double T = 27.0, double amb = 23.0) {
  return std::vector<StateSample>(10, StateSample{T, amb, ControlInput{}});
}

ChatMessage call(const char* id, const char* tool, nlohmann::json args) {
  return ChatMessage::assistant("", {ToolCall{id, tool, std::move(args)}});
}

/// Query tool whose time-series queries always fail, as in the failed
/// guide-experiment example.
class BrokenSeriesTool final : public AgentTool {
 public:
  explicit BrokenSeriesTool(std::shared_ptr<const HistoryStore> s) : inner_(std::move(s)) {}
  ToolSchema schema() const override { return inner_.schema(); }
  ToolOutcome call(const nlohmann::json& a, const ToolContext& c) const override {
    if (a.value("sql", "").find("timeseries_data") != std::string::npos) {
      return {false, {{"error", "connection lost"}}};
    }
    return inner_.call(a, c);
  }

 private:
  QueryHistoryTool inner_;
};

}  // namespace

TEST_CASE("render_prompt") {
  const auto a = render_prompt(reference_context());
  CHECK(a.find("maintain a temperature of 27.34") != std::string::npos);
  CHECK(a.find("The temperature now is 27.1 ") != std::string::npos);
  CHECK(a.find("ambient temperature is 22.6") != std::string::npos);
  CHECK(a.find("the first priority is to have a minimal usage of the fan") != std::string::npos);
  CHECK(a.find(kGuideId) != std::string::npos);

  PromptContext plain{30, 27, 23, false, Assistance::LSTM, "", ""};
  const auto b = render_prompt(plain);
  CHECK(b.find("matches the target temperature exactly") != std::string::npos);
  CHECK(b.find("minimal usage") == std::string::npos);
  CHECK(b.substr(b.size() - 10) == " Use LSTM.");

  plain.objective = "keep heater under 50%";
  CHECK(render_prompt(plain).ends_with("Use LSTM. keep heater under 50%"));

  PromptContext bad{std::nan(""), 27, 23, false, Assistance::None, "", ""};
  CHECK_THROWS_AS(render_prompt(bad), ValidationError);
}

TEST_CASE("parse_decision") {
  const auto a = parse_decision(std::string("heater_duty_cycle: 0.3, fan_on: 0"));
  CHECK(a.control == ControlInput::exact(0.30, 0));
  CHECK(a.warnings.empty());
  CHECK(parse_decision(std::string("Heater duty cycle: ≈0.30  Fan: OFF (0)")).control == ControlInput::exact(0.3, 0));
  CHECK(parse_decision(std::string("Heater duty cycle: 0.75 Fan: ON (1)")).control == ControlInput::exact(0.75, 1));

  const auto snapped = parse_decision(nlohmann::json{{"heater_duty_cycle", 0.77}, {"fan_on", 0}});
  CHECK(snapped.control == ControlInput::exact(0.75, 0));
  CHECK(snapped.warnings.size() == 1);
  CHECK(parse_decision(nlohmann::json{{"heater_duty_cycle", 0.775}, {"fan_on", 1}}).control ==
        ControlInput::exact(0.75, 1));
  const auto clamped = parse_decision(nlohmann::json{{"heater_duty_cycle", 1.2}, {"fan_on", 0}});
  CHECK(clamped.control == ControlInput::exact(1.0, 0));
  REQUIRE(clamped.warnings.size() == 1);
  CHECK(clamped.warnings[0].find("clamped") != std::string::npos);
  CHECK(parse_decision(nlohmann::json{{"heater_duty_cycle", "0.4"}, {"fan_on", true}}).control ==
        ControlInput::exact(0.4, 1));

  CHECK_THROWS_AS(parse_decision(std::string("I think the heater should be warm")), DecisionParseError);
  CHECK_THROWS_AS(parse_decision(nlohmann::json{{"fan_on", 0}}), DecisionParseError);
  CHECK_THROWS_AS(parse_decision(nlohmann::json{{"heater_duty_cycle", "lots"}, {"fan_on", 0}}), DecisionParseError);
}

TEST_CASE("guard_evidence") {
  DecisionCard card;
  card.rationale = "Decision cites historical data.";
  CHECK(guard_evidence(card, Architecture::Plain) == Verdict::Pass);
  CHECK(guard_evidence(card, Architecture::Sql) == Verdict::Violation);
  CHECK(guard_evidence(card, Architecture::Predictive) == Verdict::Violation);

  card.tool_log.push_back({"1", kQueryTool, {{"sql", kSql1}}, {{"row_count", 1}}, true});
  CHECK(guard_evidence(card, Architecture::Sql) == Verdict::Violation);
  card.tool_log.push_back({"2", kQueryTool, {{"sql", kSql2}}, {{"row_count", 0}}, true});
  CHECK(guard_evidence(card, Architecture::Sql) == Verdict::Violation);
  card.tool_log.back().result["row_count"] = 360;
  CHECK(guard_evidence(card, Architecture::Sql) == Verdict::Pass);

  DecisionCard quiet;
  quiet.rationale = "Small correction toward the target.";
  CHECK(guard_evidence(quiet, Architecture::Sql) == Verdict::Pass);

  quiet.tool_log.push_back({"1", kSimulateTool, {}, {{"error", "x"}}, false});
  CHECK(guard_evidence(quiet, Architecture::Predictive) == Verdict::Violation);
  quiet.tool_log.push_back({"2", kSimulateTool, {}, {{"results", nlohmann::json::array()}}, true});
  CHECK(guard_evidence(quiet, Architecture::Predictive) == Verdict::Pass);
}

TEST_CASE("simulate_tool delegates to rollout") {
  const PbmPredictor pbm{PlantParams{}};
  const auto hist = state();
  const ControlSequence c8(10, ControlInput::exact(0.8, 0));
  const auto r = simulate_tool(pbm, hist, std::vector<ControlSequence>{{ControlInput::exact(0.8, 0)}}, 10);
  CHECK(r["results"][0]["end_temperature"].get<double>() == rollout(pbm, hist, c8).end_temperature());
  CHECK(r["results"][0]["trajectory"].size() == 10);

  const auto one = simulate_tool(pbm, hist, std::vector<ControlSequence>{{ControlInput::exact(0.5, 1)}}, 1);
  auto h1 = hist;
  h1.back().u = ControlInput::exact(0.5, 1);
  CHECK(one["results"][0]["end_temperature"].get<double>() == pbm.predict_next(h1));

  std::vector<ControlSequence> four;
  for (double d : {0.0, 1.0, 0.5, 0.8}) four.push_back({ControlInput::exact(d, 0)});
  const auto r4 = simulate_tool(pbm, hist, four, 10);
  REQUIRE(r4["results"].size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(r4["results"][k]["heater_duty_cycle"].get<double>() == four[k][0].heater());
    const ControlSequence seq(10, four[k][0]);
    CHECK(r4["results"][k]["end_temperature"].get<double>() == rollout(pbm, hist, seq).end_temperature());
  }
  CHECK_THROWS_AS(simulate_tool(pbm, hist, four, 0), ValidationError);

  SimulateTool tool(std::make_shared<PbmPredictor>(PlantParams{}));
  CHECK_FALSE(tool.call({{"candidates", nlohmann::json::array()}}, {hist}).ok);
  CHECK_FALSE(tool.call({{"candidates", {{{"heater_duty_cycle", "x"}}}}}, {hist}).ok);
  CHECK(tool.call({{"candidates", {{{"heater_duty_cycle", 0.5}, {"fan_on", 0}}}}}, {hist}).ok);
}

TEST_CASE("plain agent with the mock backend") {
  Agent agent({Architecture::Plain}, std::make_shared<MockBackend>(), {});
  PromptContext ctx{30, 27, 23, false, Assistance::None, "", ""};
  const auto card = agent.decide(ctx, state(), ControlInput{});
  CHECK(card.tool_log.empty());
  CHECK(card.verdict == Verdict::Pass);
  CHECK(card.source == "assistant");
  CHECK(card.decision.heater() > 0);
  CHECK_FALSE(card.rationale.empty());
}

TEST_CASE("guide-experiment replay") {
  auto store = guide_store();
  auto script = std::make_shared<ScriptedBackend>(std::vector<ChatMessage>{
      call("q1", kQueryTool, {{"sql", kSql1}}),
      call("q2", kQueryTool, {{"sql", kSql2}}),
      call("fa", kFinalAnswerTool,
           {{"heater_duty_cycle", 0.30},
            {"fan_on", 0},
            {"rationale",
             "The heater duty cycle of around 0.3 is chosen to increase the temperature slightly from 27.1C to "
             "27.34C, as higher duty cycles were used for greater temperature increases in the past experiments."},
            {"evidence", "25.8, 0.418, 0; 27.3, 1.000, 0"}}),
  });
  Agent agent({Architecture::Sql}, script, {std::make_shared<QueryHistoryTool>(store)});
  const auto card = agent.decide(reference_context(), state(27.1, 22.6), ControlInput::exact(0.5, 1));
  REQUIRE(card.tool_log.size() == 2);
  CHECK(card.tool_log[0].result["rows"][0][0] == "2025-03-01 12:45:58");
  CHECK(card.tool_log[0].result["rows"][0][1] == "2025-03-01 18:44:58");
  CHECK(card.tool_log[1].result["row_count"] == 360);
  CHECK(card.verdict == Verdict::Pass);
  CHECK(card.decision == ControlInput::exact(0.30, 0));
  CHECK(card.source == "assistant");
}

TEST_CASE("failed second query triggers the guardrail") {
  auto store = guide_store();
  Agent agent({Architecture::Sql}, std::make_shared<MockBackend>(), {std::make_shared<BrokenSeriesTool>(store)});
  const ControlInput previous = ControlInput::exact(0.35, 0);
  PromptContext ctx{31.0, 28.4, 22.6, false, Assistance::SQL, kGuideId, ""};
  const auto card = agent.decide(ctx, state(28.4, 22.6), previous);
  REQUIRE(card.tool_log.size() == 2);
  CHECK_FALSE(card.tool_log[1].ok);
  CHECK(card.verdict == Verdict::Violation);
  CHECK(card.decision == previous);
  CHECK(card.source == "fallback");
  REQUIRE(card.proposed);
  CHECK(*card.proposed == ControlInput::exact(0.75, 1));
  CHECK(cites_history(card.rationale));
  bool noted = false;
  for (const auto& w : card.warnings) noted |= w.find("no time-series rows") != std::string::npos;
  CHECK(noted);

  SUBCASE("with a working store the same mock passes") {
    Agent ok({Architecture::Sql}, std::make_shared<MockBackend>(), {std::make_shared<QueryHistoryTool>(store)});
    const auto c = ok.decide(ctx, state(28.4, 22.6), previous);
    CHECK(c.verdict == Verdict::Pass);
    CHECK(c.tool_log.size() == 2);
  }
}

TEST_CASE("predictive agent") {
  auto pbm = std::make_shared<PbmPredictor>(PlantParams{});
  Agent agent({Architecture::Predictive}, std::make_shared<MockBackend>(), {std::make_shared<SimulateTool>(pbm)});
  PromptContext ctx{30, 27, 23, false, Assistance::HAM, "", ""};
  const auto card = agent.decide(ctx, state(), ControlInput{});
  CHECK(card.verdict == Verdict::Pass);
  CHECK(card.tool_log.size() == 2);
  // The applied control is the best of everything simulated.
  std::vector<CandidateOutcome> all;
  for (const auto& e : card.tool_log) {
    for (const auto& r : e.result["results"]) {
      all.push_back({ControlInput::exact(r["heater_duty_cycle"], r["fan_on"]), r["end_temperature"]});
    }
  }
  CHECK(card.decision == mock_select(all, 30, 0));

  SUBCASE("deterministic") {
    const auto again = agent.decide(ctx, state(), ControlInput{});
    CHECK(to_json(again).dump().size() > 0);
    CHECK(again.decision == card.decision);
    CHECK(again.tool_log.size() == card.tool_log.size());
  }
}

TEST_CASE("failures fall back to the previous controls") {
  const ControlInput previous = ControlInput::exact(0.45, 1);
  PromptContext ctx{30, 27, 23, false, Assistance::None, "", ""};
  for (auto mode : {FailingBackend::Mode::Transport, FailingBackend::Mode::Timeout, FailingBackend::Mode::Malformed}) {
    Agent agent({Architecture::Plain}, std::make_shared<FailingBackend>(mode), {});
    const auto card = agent.decide(ctx, state(), previous);
    CHECK(card.verdict == Verdict::Fallback);
    CHECK(card.decision == previous);
    CHECK_FALSE(card.proposed);
    CHECK(card.rationale.find("Fallback") == 0);
  }

  SUBCASE("unparseable text") {
    Agent agent({Architecture::Plain}, std::make_shared<ScriptedBackend>(std::vector{ChatMessage::assistant("hmm")}),
                {});
    CHECK(agent.decide(ctx, state(), previous).verdict == Verdict::Fallback);
  }
  SUBCASE("endless tool use is cut at the round limit") {
    auto pbm = std::make_shared<PbmPredictor>(PlantParams{});
    auto loop = std::make_shared<ScriptedBackend>(std::vector{
        call("x", kSimulateTool, {{"candidates", {{{"heater_duty_cycle", 0.5}, {"fan_on", 0}}}}})});
    for (int rounds : {1, 3, 6}) {
      Agent agent({Architecture::Predictive, rounds}, loop, {std::make_shared<SimulateTool>(pbm)});
      const auto card = agent.decide(ctx, state(), previous);
      CHECK(card.verdict == Verdict::Fallback);
      CHECK(card.tool_log.size() == static_cast<std::size_t>(rounds));
    }
  }
}

TEST_CASE("actuated controls are always valid and guardrail-consistent") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> duty(-0.5, 1.5);
  auto pbm = std::make_shared<PbmPredictor>(PlantParams{});
  PromptContext ctx{28, 26, 22.6, false, Assistance::Linear, "", ""};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ChatMessage> script;
    if (rng() % 2) script.push_back(call("s", kSimulateTool, {{"candidates", {{{"heater_duty_cycle", 0.2}, {"fan_on", 0}}}}}));
    nlohmann::json fa{{"heater_duty_cycle", duty(rng)}, {"fan_on", static_cast<int>(rng() % 3)}, {"rationale", "r"}};
    if (rng() % 5 == 0) fa["heater_duty_cycle"] = "n/a";
    script.push_back(call("f", kFinalAnswerTool, fa));
    Agent agent({Architecture::Predictive}, std::make_shared<ScriptedBackend>(script), {std::make_shared<SimulateTool>(pbm)});
    const auto card = agent.decide(ctx, state(), ControlInput{});
    CHECK(card.decision.heater_steps() >= 0);
    CHECK(card.decision.heater_steps() <= kDutyGridSteps);
    if (card.verdict != Verdict::Pass) CHECK(card.source == "fallback");
    if (card.source == "assistant") CHECK(card.verdict == Verdict::Pass);
    CHECK_FALSE(card.prompt.empty());
    CHECK_FALSE(card.evidence.empty());
    CHECK_FALSE(card.rationale.empty());
  }
}

TEST_CASE("card serialisation") {
  auto store = guide_store();
  Agent agent({Architecture::Sql}, std::make_shared<MockBackend>(), {std::make_shared<QueryHistoryTool>(store)});
  auto card = agent.decide(reference_context(), state(27.1, 22.6), ControlInput{});
  card.tick = 7;
  card.controller = "LLM-SQL-Te0-P";
  const auto j = to_json(card);
  CHECK(to_json(card_from_json(j)) == j);
  const auto text = render_card(card);
  for (const char* section : {"Prompt:", "Tool use:", "Retrieved evidence:", "Controller decision:", "Brief rationale:"}) {
    CHECK(text.find(section) != std::string::npos);
  }
}
