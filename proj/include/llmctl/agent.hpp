#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmctl/naming.hpp"
#include "llmctl/tools.hpp"

namespace llmctl {

struct PromptContext {
  double target = 0;
  double current = 0;
  double ambient = 0;
  bool penalty = false;
  Assistance tool = Assistance::None;
  std::string guide_experiment;  // SQL variant: experiment to use as a guide
  std::string objective;         // operator text, appended verbatim

  void validate() const;
};

/// The user prompt for one tick.
std::string render_prompt(const PromptContext& ctx);

enum class Architecture { Plain, Sql, Predictive };
std::string_view to_string(Architecture a);
Architecture architecture_for(Assistance a);

/// Actuator limits, grid, tool instructions and (for SQL) the table schema.
std::string render_system_prompt(Architecture arch);

enum class Verdict { Pass, Violation, Fallback };
std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct ToolLogEntry {
  std::string call_id;
  std::string tool;
  nlohmann::json arguments;
  nlohmann::json result;
  bool ok = false;
};

/// Per-tick audit record.
struct DecisionCard {
  int tick = 0;
  std::string controller;
  std::string prompt;
  std::vector<ToolLogEntry> tool_log;
  std::string evidence;
  ControlInput decision;                  // what was actuated
  std::optional<ControlInput> proposed;   // assistant proposal, when one was parsed
  std::string source = "assistant";       // "assistant" or "fallback"
  Verdict verdict = Verdict::Pass;
  std::string rationale;
  std::vector<std::string> warnings;
  double duration_s = 0;
};

nlohmann::json to_json(const DecisionCard& c);
DecisionCard card_from_json(const nlohmann::json& j);
/// Text layout: Prompt / Tool use / Retrieved evidence / Controller decision / Brief rationale.
std::string render_card(const DecisionCard& c);

class DecisionParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct ParsedDecision {
  ControlInput control;
  std::vector<std::string> warnings;  // clamping and snapping notes
};

/// From final_answer arguments.
ParsedDecision parse_decision(const nlohmann::json& arguments);
/// From free text such as "heater_duty_cycle: 0.3, fan_on: 0".
ParsedDecision parse_decision(const std::string& text);

/// True when the text claims support from past experiments.
bool cites_history(const std::string& text);

struct AgentConfig {
  Architecture architecture = Architecture::Plain;
  int max_rounds = 6;
  bool guardrail = true;

  void validate() const;
};

/// Pre-actuation evidence check on a finished card.
Verdict guard_evidence(const DecisionCard& card, Architecture arch);

/// One controller instance: a backend plus the tools of its architecture.
class Agent {
 public:
  Agent(AgentConfig cfg, std::shared_ptr<ChatBackend> backend, std::vector<std::shared_ptr<const AgentTool>> tools);

  /// Runs the tool loop for one tick. Never throws for backend or model
  /// failures: those produce a fallback card holding `previous`.
  DecisionCard decide(const PromptContext& ctx, std::span<const StateSample> history, ControlInput previous) const;

  const AgentConfig& config() const { return cfg_; }

 private:
  AgentConfig cfg_;
  std::shared_ptr<ChatBackend> backend_;
  std::vector<std::shared_ptr<const AgentTool>> tools_;
  std::vector<ToolSchema> schemas_;
  std::string system_prompt_;
};

}  // namespace llmctl
