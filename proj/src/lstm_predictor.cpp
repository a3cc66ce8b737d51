#include "llmctl/lstm_predictor.hpp"

namespace llmctl {

namespace {

constexpr Eigen::Index kFeatures = 3;

void put_window(Eigen::Ref<Eigen::VectorXd> col, std::span<const StateSample> window) {
  for (std::size_t t = 0; t < window.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t) * kFeatures;
    col(r) = window[t].T;
    col(r + 1) = window[t].u.heater();
    col(r + 2) = window[t].u.fan_on();
  }
}

// Tiles the 3-feature scaler across every window step.
nn::Standardizer tile(const nn::Standardizer& s, Eigen::Index steps) {
  nn::Standardizer out;
  out.mean = s.mean.replicate(steps, 1);
  out.scale = s.scale.replicate(steps, 1);
  return out;
}

}  // namespace

LstmPredictor::LstmPredictor(nn::LstmNet net, nn::Standardizer feature_scaler, nn::Standardizer target_scaler)
    : net_(std::move(net)), feature_scaler_(std::move(feature_scaler)), target_scaler_(std::move(target_scaler)) {
  if (net_.config().features != kFeatures) throw ValidationError("LSTM predictor expects 3 input features");
  if (feature_scaler_.mean.size() != kFeatures || target_scaler_.mean.size() != 1) {
    throw ValidationError("LSTM scaler shapes are inconsistent");
  }
}

double LstmPredictor::predict_next(std::span<const StateSample> history) const {
  const std::vector<StateSample> w = tail_window(history, history_length());
  return predict_next_batch(std::span<const std::vector<StateSample>>(&w, 1)).front();
}

std::vector<double> LstmPredictor::predict_next_batch(std::span<const std::vector<StateSample>> histories) const {
  const auto steps = net_.config().steps;
  Eigen::MatrixXd raw(steps * kFeatures, static_cast<Eigen::Index>(histories.size()));
  for (std::size_t k = 0; k < histories.size(); ++k) {
    const auto w = tail_window(histories[k], history_length());
    put_window(raw.col(static_cast<Eigen::Index>(k)), w);
  }
  const Eigen::MatrixXd pred = target_scaler_.inverse(net_.predict(tile(feature_scaler_, steps).transform(raw)));
  return {pred.data(), pred.data() + pred.size()};
}

Eigen::MatrixXd lstm_window_features(std::span<const WindowSample> samples) {
  if (samples.empty()) return {};
  const auto steps = static_cast<Eigen::Index>(samples.front().features.size());
  Eigen::MatrixXd X(steps * kFeatures, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (static_cast<Eigen::Index>(samples[k].features.size()) != steps) {
      throw ValidationError("LSTM windows must share one length");
    }
    put_window(X.col(static_cast<Eigen::Index>(k)), samples[k].features);
  }
  return X;
}

nn::TrainConfig lstm_train_defaults() {
  nn::TrainConfig c;
  c.epochs = 5000;
  c.learning_rate = 1e-3;
  c.batch_size = 40;
  c.min_delta = 5e-4;
  c.patience = 10;
  return c;
}

TrainedLstm train_lstm(std::span<const WindowSample> train, std::span<const WindowSample> validation,
                       const nn::TrainConfig& cfg, nn::LstmNet::Config net) {
  if (train.empty() || validation.empty()) throw ValidationError("LSTM training needs train and validation windows");
  net.features = kFeatures;
  net.steps = static_cast<Eigen::Index>(train.front().features.size());
  const Eigen::MatrixXd X = lstm_window_features(train);
  const Eigen::MatrixXd stacked = X.reshaped(kFeatures, X.size() / kFeatures);
  const nn::Standardizer fs = nn::Standardizer::fit(stacked);

  auto labels = [](std::span<const WindowSample> s) {
    Eigen::RowVectorXd y(static_cast<Eigen::Index>(s.size()));
    for (std::size_t k = 0; k < s.size(); ++k) y(static_cast<Eigen::Index>(k)) = s[k].label;
    return y;
  };
  const Eigen::RowVectorXd y = labels(train);
  const nn::Standardizer ts = nn::Standardizer::fit(y);
  const nn::Standardizer tiled = tile(fs, net.steps);

  nn::LstmNet model(net);
  model.init(cfg.seed);
  nn::TrainData tr{tiled.transform(X), ts.transform(y)};
  nn::TrainData va{tiled.transform(lstm_window_features(validation)), ts.transform(labels(validation))};
  TrainedLstm out;
  out.result = nn::train_nn(model, tr, va, cfg);
  out.model = std::make_shared<LstmPredictor>(std::move(model), fs, ts);
  return out;
}

}  // namespace llmctl
