#pragma once

#include <span>
#include <string>
#include <vector>

#include "llmctl/predictor.hpp"

namespace llmctl {

/// T_{t+1} = sum_i a_i T_{t-i+1} + sum_j b_h_j u_h,{t-j+1} + sum_j b_f_j u_f,{t-j+1}
struct ArxModel {
  std::vector<double> a;    // a_1..a_p
  std::vector<double> b_h;  // b^(h)_1..q
  std::vector<double> b_f;  // b^(f)_1..q

  std::size_t p() const { return a.size(); }
  std::size_t q() const { return b_h.size(); }
  void validate() const;
};

class ArxSingularError : public Error {
 public:
  ArxSingularError(std::vector<std::string> columns);
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

struct ArxFitOptions {
  /// Throw ArxSingularError on a rank-deficient design instead of falling
  /// back to a ridge-regularised solve.
  bool strict = false;
  double ridge = 1e-8;
};

struct ArxFit {
  ArxModel model;
  double sse = 0;                                // training sum of squared one-step errors
  std::vector<std::string> dependent_columns;    // non-empty iff the ridge fallback ran
};

/// Coefficient names in design-matrix order: a_1..a_p, b_h_1..q, b_f_1..q.
std::vector<std::string> arx_column_names(std::size_t p, std::size_t q);

/// Least-squares fit over window samples (column-pivoted QR).
ArxFit fit_arx(std::span<const WindowSample> samples, std::size_t p, std::size_t q, ArxFitOptions opts = {});

/// Direct evaluation; `T_hist` and `u_hist` are oldest first with the most
/// recent (time t) last.
double arx_predict(const ArxModel& model, std::span<const double> T_hist, std::span<const ControlInput> u_hist);

double arx_training_sse(const ArxModel& model, std::span<const WindowSample> samples);

class ArxPredictor final : public Predictor {
 public:
  explicit ArxPredictor(ArxModel model);

  std::string_view kind() const override { return "Linear"; }
  std::size_t history_length() const override;
  double predict_next(std::span<const StateSample> history) const override;
  const ArxModel& model() const { return model_; }

 private:
  ArxModel model_;
};

}  // namespace llmctl
