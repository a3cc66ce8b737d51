#include "llmctl/costa.hpp"

#include <cmath>

namespace llmctl {

CostaModel::CostaModel(PlantParams pbm, nn::Mlp mlp, nn::Standardizer input_scaler, double residual_scale)
    : pbm_(pbm), mlp_(std::move(mlp)), input_scaler_(std::move(input_scaler)), residual_scale_(residual_scale) {
  pbm_.validate();
  if (input_scaler_.mean.size() != 4 || input_scaler_.scale.size() != 4) {
    throw ValidationError("CoSTA input scaler must have 4 features");
  }
  if (!(residual_scale_ > 0) || !std::isfinite(residual_scale_)) throw ValidationError("bad residual scale");
}

Eigen::MatrixXd CostaModel::encode(const Eigen::MatrixXd& raw) const { return input_scaler_.transform(raw); }

double CostaModel::residual(double T_hat, double T_amb, ControlInput u) const {
  Eigen::MatrixXd x(4, 1);
  x << T_hat, T_amb, u.heater(), u.fan_on();
  return residual_scale_ * mlp_.predict(encode(x))(0);
}

CostaModel::Detail CostaModel::predict_detail(double T, double T_amb, ControlInput u) const {
  Detail d;
  d.uncorrected = pbm_solve(T, T_amb, u, pbm_);
  d.residual = residual(d.uncorrected, T_amb, u);
  d.corrected = pbm_solve(T, T_amb, u, pbm_, kControlPeriod, d.residual);
  if (!std::isfinite(d.corrected) || d.corrected < kSanityMin || d.corrected > kSanityMax) {
    throw PlantSanityError("CoSTA prediction " + std::to_string(d.corrected) + " °C is outside the sanity band");
  }
  return d;
}

double CostaModel::predict_next(std::span<const StateSample> history) const {
  if (history.empty()) throw ValidationError("predictor history is empty");
  const StateSample& s = history.back();
  return predict_detail(s.T, s.T_amb, s.u).corrected;
}

std::vector<double> CostaModel::predict_next_batch(std::span<const std::vector<StateSample>> histories) const {
  const auto n = static_cast<Eigen::Index>(histories.size());
  Eigen::MatrixXd raw(4, n);
  std::vector<double> t_hat(histories.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    if (histories[k].empty()) throw ValidationError("predictor history is empty");
    const StateSample& s = histories[k].back();
    t_hat[k] = pbm_solve(s.T, s.T_amb, s.u, pbm_);
    raw.col(k) << t_hat[k], s.T_amb, s.u.heater(), s.u.fan_on();
  }
  const Eigen::RowVectorXd r = residual_scale_ * mlp_.predict(encode(raw));
  std::vector<double> out(histories.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const StateSample& s = histories[k].back();
    out[k] = pbm_solve(s.T, s.T_amb, s.u, pbm_, kControlPeriod, r(k));
    if (!std::isfinite(out[k]) || out[k] < kSanityMin || out[k] > kSanityMax) {
      throw PlantSanityError("CoSTA prediction " + std::to_string(out[k]) + " °C is outside the sanity band");
    }
  }
  return out;
}

double costa_predict(double T, double T_amb, ControlInput u, const CostaModel& model) {
  return model.predict_detail(T, T_amb, u).corrected;
}

Eigen::MatrixXd costa_features(std::span<const ResidualSample> samples) {
  Eigen::MatrixXd X(4, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    X.col(static_cast<Eigen::Index>(k)) << s.T_hat, s.T_amb, s.u.heater(), s.u.fan_on();
  }
  return X;
}

nn::TrainConfig costa_train_defaults() {
  nn::TrainConfig c;
  c.epochs = 1000;
  c.learning_rate = 1e-3;
  c.batch_size = 64;
  c.min_delta = 5e-4;
  c.patience = 10;
  return c;
}

TrainedCosta train_costa(std::span<const ResidualSample> train, std::span<const ResidualSample> validation,
                         const PlantParams& pbm, const nn::TrainConfig& cfg, nn::Mlp::Config net) {
  if (train.empty() || validation.empty()) throw ValidationError("CoSTA training needs train and validation samples");
  const Eigen::MatrixXd X = costa_features(train);
  Eigen::RowVectorXd r(static_cast<Eigen::Index>(train.size()));
  for (std::size_t k = 0; k < train.size(); ++k) r(static_cast<Eigen::Index>(k)) = train[k].r;
  // The target is scaled but not centred so a zero network output means r = 0.
  const double scale = nn::Standardizer::fit(r, false).scale(0);
  const nn::Standardizer in = nn::Standardizer::fit(X);

  Eigen::RowVectorXd rv(static_cast<Eigen::Index>(validation.size()));
  for (std::size_t k = 0; k < validation.size(); ++k) rv(static_cast<Eigen::Index>(k)) = validation[k].r;

  net.input = 4;
  nn::Mlp mlp(net);
  mlp.init(cfg.seed);
  nn::TrainData tr{in.transform(X), r / scale};
  nn::TrainData va{in.transform(costa_features(validation)), rv / scale};
  TrainedCosta out;
  out.result = nn::train_nn(mlp, tr, va, cfg);
  out.model = std::make_shared<CostaModel>(pbm, std::move(mlp), in, scale);
  return out;
}

}  // namespace llmctl
