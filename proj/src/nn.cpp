#include "llmctl/nn.hpp"

#include <cmath>

namespace llmctl::nn {

std::vector<const Param*> Network::parameters() const {
  auto ps = const_cast<Network*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Linear::Linear(std::string name, Eigen::Index in, Eigen::Index out) {
  weight.name = name + ".weight";
  bias.name = name + ".bias";
  weight.resize(out, in);
  bias.resize(out, 1);
}

void Linear::init(std::mt19937_64& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(weight.value.cols()));
  std::uniform_real_distribution<double> dist(-k, k);
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < bias.value.size(); ++i) bias.value.data()[i] = dist(rng);
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) {
  weight.grad.noalias() += dy * x.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
  Eigen::MatrixXd mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  return mask;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X, bool center) {
  Standardizer s;
  const auto n = static_cast<double>(X.cols());
  s.mean = center ? Eigen::VectorXd(X.rowwise().mean()) : Eigen::VectorXd::Zero(X.rows());
  s.scale.resize(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double var = (X.row(r).array() - s.mean(r)).square().sum() / std::max(n, 1.0);
    const double sd = std::sqrt(var);
    s.scale(r) = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(Eigen::Index n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& X) const {
  return (X.colwise() - mean).array().colwise() / scale.array();
}

Eigen::MatrixXd Standardizer::inverse(const Eigen::MatrixXd& Z) const {
  return (Z.array().colwise() * scale.array()).matrix().colwise() + mean;
}

nlohmann::json Standardizer::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto s = j.at("scale").get<std::vector<double>>();
  if (m.size() != s.size()) throw ValidationError("scaler mean/scale length mismatch");
  Standardizer out;
  out.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  out.scale = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  return out;
}

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const Param* p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param& p = *params_[k];
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * p.grad;
    v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + cfg_.epsilon);
  }
}

std::vector<Eigen::MatrixXd> snapshot(Network& net) {
  std::vector<Eigen::MatrixXd> out;
  for (const Param* p : net.parameters()) out.push_back(p->value);
  return out;
}

void restore(Network& net, const std::vector<Eigen::MatrixXd>& values) {
  auto ps = net.parameters();
  if (ps.size() != values.size()) throw ValidationError("snapshot does not match network");
  for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->value = values[k];
}

nlohmann::json params_to_json(const Network& net) {
  nlohmann::json j = nlohmann::json::object();
  for (const Param* p : net.parameters()) {
    const Eigen::MatrixXd& v = p->value;
    std::vector<double> data(v.data(), v.data() + v.size());  // column-major
    j[p->name] = {{"rows", v.rows()}, {"cols", v.cols()}, {"data", std::move(data)}};
  }
  return j;
}

void params_from_json(Network& net, const nlohmann::json& j) {
  for (Param* p : net.parameters()) {
    if (!j.contains(p->name)) throw ValidationError("checkpoint lacks parameter " + p->name);
    const auto& e = j.at(p->name);
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw ValidationError("checkpoint shape mismatch for " + p->name);
    }
    const auto data = e.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ValidationError("bad data size for " + p->name);
    p->value = Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
  }
}

}  // namespace llmctl::nn
