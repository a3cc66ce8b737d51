#pragma once

#include <memory>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "llmctl/history.hpp"
#include "llmctl/llmlink.hpp"
#include "llmctl/mock_backend.hpp"
#include "llmctl/predictor.hpp"

namespace llmctl {

/// What a tool sees of the plant on the current tick.
struct ToolContext {
  std::span<const StateSample> history;  // oldest first, last is now
};

struct ToolOutcome {
  bool ok = false;
  nlohmann::json result;  // {"error": ...} when !ok
};

class AgentTool {
 public:
  virtual ~AgentTool() = default;
  virtual ToolSchema schema() const = 0;
  /// Never throws for bad arguments; reports them as an error outcome.
  virtual ToolOutcome call(const nlohmann::json& arguments, const ToolContext& ctx) const = 0;
};

/// Runs one SQL statement against the history store. Result:
/// {"columns": [...], "rows": [[...]], "row_count": n}.
class QueryHistoryTool final : public AgentTool {
 public:
  explicit QueryHistoryTool(std::shared_ptr<const HistoryStore> store);
  ToolSchema schema() const override;
  ToolOutcome call(const nlohmann::json& arguments, const ToolContext& ctx) const override;

 private:
  std::shared_ptr<const HistoryStore> store_;
};

inline constexpr int kDefaultHorizon = 10;
inline constexpr std::size_t kMaxSimulateCandidates = 64;

/// Rolls a predictor forward under candidate control sequences. Arguments:
/// {"candidates": [{"heater_duty_cycle", "fan_on"}...]} for constant
/// sequences and/or {"sequences": [[{...}, ...], ...]}, plus "horizon".
class SimulateTool final : public AgentTool {
 public:
  explicit SimulateTool(std::shared_ptr<const Predictor> predictor);
  ToolSchema schema() const override;
  ToolOutcome call(const nlohmann::json& arguments, const ToolContext& ctx) const override;
  const Predictor& predictor() const { return *predictor_; }

 private:
  std::shared_ptr<const Predictor> predictor_;
};

/// Direct form of the simulate tool: one result object per sequence, in
/// order, each with the end temperature and the full trajectory.
nlohmann::json simulate_tool(const Predictor& predictor, std::span<const StateSample> history,
                             std::span<const ControlSequence> sequences, int horizon);

/// Schema of the structured decision the model is asked to emit.
ToolSchema final_answer_schema();

}  // namespace llmctl
