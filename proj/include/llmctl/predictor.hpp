#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llmctl/dataset.hpp"
#include "llmctl/plantsim.hpp"

namespace llmctl {

/// One-step temperature predictor. `history` is ordered oldest first; its
/// last element is the current state and carries the control about to be
/// applied. Implementations are immutable after construction and safe to
/// share across threads.
class Predictor {
 public:
  virtual ~Predictor() = default;

  /// Assistance name used in controller names: PBM, Linear, LSTM or HAM.
  virtual std::string_view kind() const = 0;

  /// Number of trailing samples the model reads. Shorter histories are
  /// padded at the front with copies of their oldest sample.
  virtual std::size_t history_length() const = 0;

  virtual double predict_next(std::span<const StateSample> history) const = 0;

  /// Many independent one-step predictions; models override this to batch.
  virtual std::vector<double> predict_next_batch(std::span<const std::vector<StateSample>> histories) const;
};

using ControlSequence = std::vector<ControlInput>;

struct Trajectory {
  std::vector<double> temps;  // predicted T after each control step

  double end_temperature() const { return temps.back(); }
};

/// Autoregressive rollout: each prediction becomes the next current state.
/// Ambient is held at the current value. Throws on an empty sequence.
Trajectory rollout(const Predictor& predictor, std::span<const StateSample> history,
                   std::span<const ControlInput> controls);

/// Same as calling rollout for every sequence, batched step by step.
std::vector<Trajectory> rollout_batch(const Predictor& predictor, std::span<const StateSample> history,
                                      std::span<const ControlSequence> sequences);

/// Last `n` samples of `history`, front-padded with its first sample.
std::vector<StateSample> tail_window(std::span<const StateSample> history, std::size_t n);

/// Uncorrected physics model used as a predictor.
class PbmPredictor final : public Predictor {
 public:
  explicit PbmPredictor(PlantParams params) : params_(params) {}

  std::string_view kind() const override { return "PBM"; }
  std::size_t history_length() const override { return 1; }
  double predict_next(std::span<const StateSample> history) const override;

 private:
  PlantParams params_;
};

}  // namespace llmctl
