#pragma once

#include <span>

#include "llmctl/mlp.hpp"
#include "llmctl/predictor.hpp"
#include "llmctl/train.hpp"

namespace llmctl {

/// Physics model plus a learned corrective source term, solved in two
/// passes: the uncorrected solve gives T_hat, the network maps
/// (T_hat, T_amb, u_h, u_f) to a source r, and the physics model is solved
/// again from the same start with r added as a constant source.
class CostaModel final : public Predictor {
 public:
  CostaModel(PlantParams pbm, nn::Mlp mlp, nn::Standardizer input_scaler, double residual_scale);

  struct Detail {
    double uncorrected = 0;  // T_hat
    double residual = 0;     // r, °C/s
    double corrected = 0;    // T_{t+1}
  };

  Detail predict_detail(double T, double T_amb, ControlInput u) const;

  /// Learned source term evaluated at an uncorrected prediction.
  double residual(double T_hat, double T_amb, ControlInput u) const;

  std::string_view kind() const override { return "HAM"; }
  std::size_t history_length() const override { return 1; }
  double predict_next(std::span<const StateSample> history) const override;
  std::vector<double> predict_next_batch(std::span<const std::vector<StateSample>> histories) const override;

  const PlantParams& pbm() const { return pbm_; }
  const nn::Mlp& network() const { return mlp_; }
  nn::Mlp& network() { return mlp_; }
  const nn::Standardizer& input_scaler() const { return input_scaler_; }
  double residual_scale() const { return residual_scale_; }

 private:
  Eigen::MatrixXd encode(const Eigen::MatrixXd& raw) const;

  PlantParams pbm_;
  nn::Mlp mlp_;
  nn::Standardizer input_scaler_;
  double residual_scale_;
};

double costa_predict(double T, double T_amb, ControlInput u, const CostaModel& model);

/// Raw network inputs (T_hat, T_amb, u_h, u_f) as columns.
Eigen::MatrixXd costa_features(std::span<const ResidualSample> samples);

struct TrainedCosta {
  std::shared_ptr<CostaModel> model;
  nn::TrainResult result;
};

TrainedCosta train_costa(std::span<const ResidualSample> train, std::span<const ResidualSample> validation,
                         const PlantParams& pbm, const nn::TrainConfig& cfg, nn::Mlp::Config net = {});

/// Hyperparameters of the residual network: 1000 epochs, lr 1e-3, batch 64,
/// min delta 5e-4, patience 10.
nn::TrainConfig costa_train_defaults();

}  // namespace llmctl
