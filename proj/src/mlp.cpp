#include "llmctl/mlp.hpp"

namespace llmctl::nn {

Mlp::Mlp(Config cfg)
    : cfg_(cfg),
      l1_("linear1", cfg.input, cfg.hidden),
      l2_("linear2", cfg.hidden, cfg.hidden),
      l3_("linear3", cfg.hidden, 1) {}

void Mlp::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  l1_.init(rng);
  l2_.init(rng);
  l3_.init(rng);
}

std::vector<Param*> Mlp::parameters() {
  return {&l1_.weight, &l1_.bias, &l2_.weight, &l2_.bias, &l3_.weight, &l3_.bias};
}

Eigen::RowVectorXd Mlp::predict(const Eigen::MatrixXd& X) const {
  if (X.rows() != cfg_.input) throw ValidationError("MLP input has wrong feature count");
  const Eigen::MatrixXd a1 = l1_.forward(X).cwiseMax(0.0);
  const Eigen::MatrixXd a2 = l2_.forward(a1).cwiseMax(0.0);
  return l3_.forward(a2);
}

double Mlp::loss_and_grad(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& y, std::mt19937_64* rng) {
  if (X.rows() != cfg_.input || X.cols() != y.cols()) throw ValidationError("MLP batch shape mismatch");
  for (Param* p : parameters()) p->grad.setZero();
  const auto B = X.cols();

  const Eigen::MatrixXd z1 = l1_.forward(X);
  Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
  Eigen::MatrixXd m1, m2;
  if (rng) {
    m1 = dropout_mask(a1.rows(), B, cfg_.dropout, *rng);
    a1 = a1.cwiseProduct(m1);
  }
  const Eigen::MatrixXd z2 = l2_.forward(a1);
  Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
  if (rng) {
    m2 = dropout_mask(a2.rows(), B, cfg_.dropout, *rng);
    a2 = a2.cwiseProduct(m2);
  }
  const Eigen::RowVectorXd out = l3_.forward(a2);

  const Eigen::RowVectorXd err = out - y;
  const double loss = err.squaredNorm() / static_cast<double>(B);
  const Eigen::MatrixXd dout = (2.0 / static_cast<double>(B)) * err;

  Eigen::MatrixXd da2 = l3_.backward(a2, dout);
  if (rng) da2 = da2.cwiseProduct(m2);
  const Eigen::MatrixXd dz2 = (z2.array() > 0.0).select(da2, 0.0);
  Eigen::MatrixXd da1 = l2_.backward(a1, dz2);
  if (rng) da1 = da1.cwiseProduct(m1);
  const Eigen::MatrixXd dz1 = (z1.array() > 0.0).select(da1, 0.0);
  l1_.backward(X, dz1);
  return loss;
}

}  // namespace llmctl::nn
