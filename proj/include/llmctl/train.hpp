#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "llmctl/nn.hpp"

namespace llmctl::nn {

struct TrainConfig {
  int epochs = 1000;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  double min_delta = 5e-4;  // required validation-MSE improvement
  int patience = 10;        // epochs without improvement before stopping
  std::uint64_t seed = 0;
  bool verbose = false;

  void validate() const;
};

/// Samples as columns of X with targets in y, already standardized.
struct TrainData {
  Eigen::MatrixXd X;
  Eigen::RowVectorXd y;

  std::size_t size() const { return static_cast<std::size_t>(X.cols()); }
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0;  // mean minibatch loss with dropout active
  double val_mse = 0;    // inference mode
};

struct TrainResult {
  std::vector<EpochRecord> curve;
  int best_epoch = 0;
  double best_val_mse = 0;
  bool early_stopped = false;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what) : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

double mse(const Network& net, const TrainData& data);

/// Minibatch Adam on MSE with early stopping on validation MSE. The network
/// is left holding the best-validation parameters.
TrainResult train_nn(Network& net, const TrainData& train, const TrainData& validation, const TrainConfig& cfg);

void write_loss_curve_csv(const TrainResult& result, const std::filesystem::path& path);

}  // namespace llmctl::nn
