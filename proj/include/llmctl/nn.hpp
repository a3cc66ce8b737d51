#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "llmctl/error.hpp"

namespace llmctl::nn {

struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value.setZero(rows, cols);
    grad.setZero(rows, cols);
  }
};

/// A trainable regressor mapping feature columns to one scalar each.
class Network {
 public:
  virtual ~Network() = default;

  virtual std::vector<Param*> parameters() = 0;
  std::vector<const Param*> parameters() const;

  /// Inference mode (dropout off). X is features x samples.
  virtual Eigen::RowVectorXd predict(const Eigen::MatrixXd& X) const = 0;

  /// Overwrites every grad with d(MSE)/d(param) for the batch and returns
  /// the MSE. Dropout is active iff `dropout_rng` is non-null.
  virtual double loss_and_grad(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& y,
                               std::mt19937_64* dropout_rng) = 0;

  virtual std::size_t input_size() const = 0;

  std::size_t parameter_count() const;
};

/// Dense layer y = W x + b over batched columns.
struct Linear {
  Param weight;
  Param bias;

  Linear() = default;
  Linear(std::string name, Eigen::Index in, Eigen::Index out);

  void init(std::mt19937_64& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    return (weight.value * x).colwise() + bias.value.col(0);
  }
  /// Accumulates grads, returns d loss / d x.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy);
};

/// Inverted dropout mask: kept units are scaled by 1/(1-p).
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng);

/// Per-row affine normalisation (x - mean) / scale.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  /// Fits on columns of X. Rows with (near) zero spread get scale 1.
  static Standardizer fit(const Eigen::MatrixXd& X, bool center = true);
  static Standardizer identity(Eigen::Index n);

  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& Z) const;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg);
  void step();

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::vector<Eigen::MatrixXd> m_, v_;
  long t_ = 0;
};

/// Flattened copies of parameter values, used for snapshots.
std::vector<Eigen::MatrixXd> snapshot(Network& net);
void restore(Network& net, const std::vector<Eigen::MatrixXd>& values);

nlohmann::json params_to_json(const Network& net);
void params_from_json(Network& net, const nlohmann::json& j);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace llmctl::nn
