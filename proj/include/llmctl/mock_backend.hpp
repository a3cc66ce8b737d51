#pragma once

#include <span>
#include <vector>

#include "llmctl/control.hpp"
#include "llmctl/llmlink.hpp"

namespace llmctl {

/// Tool names shared by the agent and the offline backends.
inline constexpr const char* kQueryTool = "query_history";
inline constexpr const char* kSimulateTool = "simulate";
inline constexpr const char* kFinalAnswerTool = "final_answer";

struct MockPolicy {
  std::vector<int> candidate_steps{0, 5, 10, 15, 20};  // duty grid steps of the first round
  bool fan_candidates = true;   // also try every candidate with the fan on
  bool refine = true;           // second round on the full grid around the best first-round duty
  int refine_radius = 4;        // grid steps either side of the first-round winner
  int horizon = 10;
  double penalty_weight = 1.0;  // λ when the prompt asks for minimal fan use

  void validate() const;
};

struct CandidateOutcome {
  ControlInput u;
  double end_temperature = 0;
};

/// argmin |T_end - target| + λ·u_f, ties to lower duty then fan off.
ControlInput mock_select(std::span<const CandidateOutcome> candidates, double target, double lambda);

/// Numbers the mock reads back out of a rendered prompt.
struct PromptReading {
  double target = 0;
  double current = 0;
  double ambient = 0;
  bool penalty = false;
  std::string guide_experiment;  // empty when none is named
};
PromptReading read_prompt(const std::string& prompt);

/// Deterministic stand-in for a tool-using model. It picks its behaviour
/// from the advertised tools: `simulate` → candidate search, `query_history`
/// → guide-experiment lookup, neither → a feed-forward heuristic.
class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(MockPolicy policy = {});
  ChatMessage chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) override;
  const MockPolicy& policy() const { return policy_; }

 private:
  MockPolicy policy_;
};

/// Replays fixed assistant turns: the reply to a conversation is entry k,
/// where k counts the assistant messages already in it. The last entry
/// repeats once the script runs out.
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<ChatMessage> script);
  ChatMessage chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) override;

 private:
  std::vector<ChatMessage> script_;
};

/// Fails every call with the chosen error type.
class FailingBackend final : public ChatBackend {
 public:
  enum class Mode { Transport, Timeout, Malformed };
  explicit FailingBackend(Mode mode = Mode::Transport) : mode_(mode) {}
  ChatMessage chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) override;

 private:
  Mode mode_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg, const MockPolicy& policy = {});

}  // namespace llmctl
