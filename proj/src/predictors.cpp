#include "llmctl/predictor.hpp"

#include <algorithm>

namespace llmctl {

std::vector<double> Predictor::predict_next_batch(std::span<const std::vector<StateSample>> histories) const {
  std::vector<double> out;
  out.reserve(histories.size());
  for (const auto& h : histories) out.push_back(predict_next(h));
  return out;
}

std::vector<StateSample> tail_window(std::span<const StateSample> history, std::size_t n) {
  if (history.empty()) throw ValidationError("predictor history is empty");
  std::vector<StateSample> out;
  out.reserve(n);
  const std::size_t have = std::min(n, history.size());
  for (std::size_t k = have; k < n; ++k) out.push_back(history.front());
  // With padding, the copies must not claim the current control.
  if (have < n && history.size() == 1) {
    for (auto& s : out) s.u = ControlInput{};
  }
  out.insert(out.end(), history.end() - static_cast<std::ptrdiff_t>(have), history.end());
  return out;
}

Trajectory rollout(const Predictor& predictor, std::span<const StateSample> history,
                   std::span<const ControlInput> controls) {
  ControlSequence seq(controls.begin(), controls.end());
  return rollout_batch(predictor, history, std::span<const ControlSequence>(&seq, 1)).front();
}

std::vector<Trajectory> rollout_batch(const Predictor& predictor, std::span<const StateSample> history,
                                      std::span<const ControlSequence> sequences) {
  if (history.empty()) throw ValidationError("rollout needs a non-empty history");
  std::size_t horizon = 0;
  for (const auto& s : sequences) {
    if (s.empty()) throw ValidationError("rollout control sequence is empty");
    horizon = std::max(horizon, s.size());
  }
  const std::size_t need = predictor.history_length();
  const std::vector<StateSample> base = tail_window(history, need);
  std::vector<std::vector<StateSample>> work(sequences.size(), base);
  std::vector<Trajectory> out(sequences.size());

  std::vector<std::size_t> active;
  std::vector<std::vector<StateSample>> batch;
  for (std::size_t k = 0; k < horizon; ++k) {
    active.clear();
    batch.clear();
    for (std::size_t s = 0; s < sequences.size(); ++s) {
      if (k >= sequences[s].size()) continue;
      work[s].back().u = sequences[s][k];
      active.push_back(s);
      batch.push_back(work[s]);
    }
    const std::vector<double> next = predictor.predict_next_batch(batch);
    for (std::size_t j = 0; j < active.size(); ++j) {
      auto& w = work[active[j]];
      out[active[j]].temps.push_back(next[j]);
      StateSample s = w.back();
      s.T = next[j];
      w.erase(w.begin());
      w.push_back(s);
    }
  }
  return out;
}

double PbmPredictor::predict_next(std::span<const StateSample> history) const {
  if (history.empty()) throw ValidationError("predictor history is empty");
  const StateSample& now = history.back();
  return pbm_solve(now.T, now.T_amb, now.u, params_);
}

}  // namespace llmctl
