#pragma once

#include "llmctl/nn.hpp"

namespace llmctl::nn {

struct MlpConfig {
  Eigen::Index input = 4;
  Eigen::Index hidden = 64;
  double dropout = 0.2;
};

/// Linear-ReLU-Dropout-Linear-ReLU-Dropout-Linear regressor.
class Mlp final : public Network {
 public:
  using Config = MlpConfig;

  explicit Mlp(Config cfg = {});

  void init(std::uint64_t seed);
  const Config& config() const { return cfg_; }

  std::vector<Param*> parameters() override;
  Eigen::RowVectorXd predict(const Eigen::MatrixXd& X) const override;
  double loss_and_grad(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& y,
                       std::mt19937_64* dropout_rng) override;
  std::size_t input_size() const override { return static_cast<std::size_t>(cfg_.input); }

  Linear& output_layer() { return l3_; }

 private:
  Config cfg_;
  Linear l1_, l2_, l3_;
};

}  // namespace llmctl::nn
