#include "llmctl/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace llmctl::nn {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(learning_rate > 0)) throw ValidationError("learning rate must be > 0");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
}

double mse(const Network& net, const TrainData& data) {
  // Chunked so long LSTM sets do not allocate one giant activation matrix.
  constexpr Eigen::Index kChunk = 1024;
  double sum = 0;
  for (Eigen::Index start = 0; start < data.X.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, data.X.cols() - start);
    const Eigen::RowVectorXd pred = net.predict(data.X.middleCols(start, n));
    sum += (pred - data.y.middleCols(start, n)).squaredNorm();
  }
  return sum / static_cast<double>(std::max<Eigen::Index>(data.X.cols(), 1));
}

TrainResult train_nn(Network& net, const TrainData& train, const TrainData& validation, const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0 || validation.size() == 0) throw ValidationError("train and validation splits must be non-empty");
  if (static_cast<std::size_t>(train.X.rows()) != net.input_size() ||
      static_cast<std::size_t>(validation.X.rows()) != net.input_size()) {
    throw ValidationError("training data feature count does not match the network");
  }

  std::mt19937_64 rng(cfg.seed);
  Adam adam(net.parameters(), {cfg.learning_rate});
  std::vector<Eigen::Index> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  auto best_params = snapshot(net);
  int stale = 0;
  Eigen::MatrixXd xb;
  Eigen::RowVectorXd yb;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto n = static_cast<Eigen::Index>(std::min(cfg.batch_size, order.size() - start));
      xb.resize(train.X.rows(), n);
      yb.resize(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        xb.col(k) = train.X.col(order[start + k]);
        yb(k) = train.y(order[start + k]);
      }
      const double loss = net.loss_and_grad(xb, yb, &rng);
      if (!std::isfinite(loss)) {
        throw DivergenceError(epoch, "training diverged (loss is not finite) at epoch " + std::to_string(epoch));
      }
      adam.step();
      loss_sum += loss;
      ++batches;
    }
    const double val = mse(net, validation);
    if (!std::isfinite(val)) {
      throw DivergenceError(epoch, "validation loss is not finite at epoch " + std::to_string(epoch));
    }
    result.curve.push_back({epoch, loss_sum / static_cast<double>(batches), val});
    if (cfg.verbose) std::fprintf(stderr, "epoch %d train %.6g val %.6g\n", epoch, result.curve.back().train_mse, val);

    if (val < best - cfg.min_delta) {
      best = val;
      best_params = snapshot(net);
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  restore(net, best_params);
  result.best_val_mse = best;
  return result;
}

void write_loss_curve_csv(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_mse,val_mse\n";
  char buf[96];
  for (const auto& r : result.curve) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", r.epoch, r.train_mse, r.val_mse);
    out << buf;
  }
}

}  // namespace llmctl::nn
