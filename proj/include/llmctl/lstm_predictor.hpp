#pragma once

#include <memory>
#include <span>

#include "llmctl/lstm.hpp"
#include "llmctl/predictor.hpp"
#include "llmctl/train.hpp"

namespace llmctl {

/// Window-to-next-temperature LSTM over (T, u_h, u_f) triples.
class LstmPredictor final : public Predictor {
 public:
  /// `feature_scaler` has 3 rows (T, u_h, u_f); `target_scaler` has 1.
  LstmPredictor(nn::LstmNet net, nn::Standardizer feature_scaler, nn::Standardizer target_scaler);

  std::string_view kind() const override { return "LSTM"; }
  std::size_t history_length() const override { return static_cast<std::size_t>(net_.config().steps); }
  double predict_next(std::span<const StateSample> history) const override;
  std::vector<double> predict_next_batch(std::span<const std::vector<StateSample>> histories) const override;

  const nn::LstmNet& network() const { return net_; }
  const nn::Standardizer& feature_scaler() const { return feature_scaler_; }
  const nn::Standardizer& target_scaler() const { return target_scaler_; }

 private:
  nn::LstmNet net_;
  nn::Standardizer feature_scaler_;
  nn::Standardizer target_scaler_;
};

/// Raw flattened windows: column per sample, row t*3 + {0: T, 1: u_h, 2: u_f}.
Eigen::MatrixXd lstm_window_features(std::span<const WindowSample> samples);

struct TrainedLstm {
  std::shared_ptr<LstmPredictor> model;
  nn::TrainResult result;
};

TrainedLstm train_lstm(std::span<const WindowSample> train, std::span<const WindowSample> validation,
                       const nn::TrainConfig& cfg, nn::LstmNet::Config net = {});

/// 5000 epochs, lr 1e-3, batch 40, min delta 5e-4, patience 10.
nn::TrainConfig lstm_train_defaults();

}  // namespace llmctl
