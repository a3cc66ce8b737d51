#include "llmctl/lstm.hpp"

#include <cmath>

namespace llmctl::nn {

namespace {

Eigen::MatrixXd sigm(const Eigen::MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

}  // namespace

LstmCellParams::LstmCellParams(Eigen::Index input, Eigen::Index hidden)
    : W(Eigen::MatrixXd::Zero(4 * hidden, hidden + input)), b(Eigen::VectorXd::Zero(4 * hidden)) {}

LstmCellCache lstm_cell(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& c_prev,
                        const LstmCellParams& params) {
  const Eigen::Index H = params.hidden();
  const Eigen::Index D = params.input();
  if (params.W.rows() % 4 != 0 || params.b.size() != 4 * H) throw ValidationError("LSTM gate shapes are inconsistent");
  if (x.rows() != D || h_prev.rows() != H || c_prev.rows() != H || x.cols() != h_prev.cols() ||
      x.cols() != c_prev.cols()) {
    throw ValidationError("LSTM cell dimension mismatch");
  }
  LstmCellCache k;
  k.x = x;
  k.h_prev = h_prev;
  k.c_prev = c_prev;
  Eigen::MatrixXd z = params.W.leftCols(H) * h_prev + params.W.rightCols(D) * x;
  z.colwise() += params.b;
  k.f = sigm(z.middleRows(0, H));
  k.i = sigm(z.middleRows(H, H));
  k.g = z.middleRows(2 * H, H).array().tanh();
  k.o = sigm(z.middleRows(3 * H, H));
  k.c = k.f.cwiseProduct(c_prev) + k.i.cwiseProduct(k.g);
  k.tanh_c = k.c.array().tanh();
  k.h = k.o.cwiseProduct(k.tanh_c);
  return k;
}

LstmCellGrads lstm_cell_backward(const LstmCellCache& k, const Eigen::MatrixXd& dh, const Eigen::MatrixXd& dc_in,
                                 const LstmCellParams& params) {
  const Eigen::Index H = params.hidden();
  const auto B = k.x.cols();
  Eigen::MatrixXd dz(4 * H, B);
  const Eigen::MatrixXd dc = dc_in + dh.cwiseProduct(k.o).cwiseProduct((1.0 - k.tanh_c.array().square()).matrix());
  dz.middleRows(0, H) = dc.cwiseProduct(k.c_prev).array() * k.f.array() * (1.0 - k.f.array());
  dz.middleRows(H, H) = dc.cwiseProduct(k.g).array() * k.i.array() * (1.0 - k.i.array());
  dz.middleRows(2 * H, H) = dc.cwiseProduct(k.i).array() * (1.0 - k.g.array().square());
  dz.middleRows(3 * H, H) = dh.cwiseProduct(k.tanh_c).array() * k.o.array() * (1.0 - k.o.array());

  LstmCellGrads g;
  Eigen::MatrixXd hx(H + k.x.rows(), B);
  hx << k.h_prev, k.x;
  g.dW = dz * hx.transpose();
  g.db = dz.rowwise().sum();
  const Eigen::MatrixXd dhx = params.W.transpose() * dz;
  g.dh_prev = dhx.topRows(H);
  g.dx = dhx.bottomRows(k.x.rows());
  g.dc_prev = dc.cwiseProduct(k.f);
  return g;
}

LstmLayer::LstmLayer(std::string name, Eigen::Index input_size, Eigen::Index hidden_size)
    : hidden(hidden_size), input(input_size) {
  weight.name = name + ".weight";
  bias.name = name + ".bias";
  weight.resize(4 * hidden, hidden + input);
  bias.resize(4 * hidden, 1);
}

void LstmLayer::init(std::mt19937_64& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> dist(-k, k);
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < bias.value.size(); ++i) bias.value.data()[i] = dist(rng);
}

Eigen::MatrixXd LstmLayer::forward(const Eigen::MatrixXd& x_all, Eigen::Index steps, Eigen::Index batch,
                                   Cache* cache) const {
  const Eigen::Index H = hidden;
  const Eigen::Index LB = steps * batch;
  Eigen::MatrixXd zx = weight.value.rightCols(input) * x_all;
  zx.colwise() += bias.value.col(0);

  Eigen::MatrixXd h_all(H, LB);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(H, batch);
  if (cache) {
    cache->x_all = x_all;
    cache->hprev_all.resize(H, LB);
    cache->cprev_all.resize(H, LB);
    cache->gates.resize(4 * H, LB);
    cache->tanh_c.resize(H, LB);
  }
  const auto Wh = weight.value.leftCols(H);
  Eigen::MatrixXd z(4 * H, batch);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Eigen::Index col = t * batch;
    z.noalias() = Wh * h;
    z += zx.middleCols(col, batch);
    z.topRows(2 * H) = sigm(z.topRows(2 * H));
    z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh();
    z.bottomRows(H) = sigm(z.bottomRows(H));
    if (cache) {
      cache->hprev_all.middleCols(col, batch) = h;
      cache->cprev_all.middleCols(col, batch) = c;
      cache->gates.middleCols(col, batch) = z;
    }
    c = z.topRows(H).cwiseProduct(c) + z.middleRows(H, H).cwiseProduct(z.middleRows(2 * H, H));
    const Eigen::MatrixXd tc = c.array().tanh();
    h = z.bottomRows(H).cwiseProduct(tc);
    if (cache) cache->tanh_c.middleCols(col, batch) = tc;
    h_all.middleCols(col, batch) = h;
  }
  return h_all;
}

Eigen::MatrixXd LstmLayer::backward(const Cache& k, const Eigen::MatrixXd& dh_all, Eigen::Index steps,
                                    Eigen::Index batch) {
  const Eigen::Index H = hidden;
  Eigen::MatrixXd dz_all(4 * H, steps * batch);
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(H, batch);
  Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(H, batch);
  const auto Wh = weight.value.leftCols(H);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const Eigen::Index col = t * batch;
    const auto f = k.gates.block(0, col, H, batch).array();
    const auto i = k.gates.block(H, col, H, batch).array();
    const auto g = k.gates.block(2 * H, col, H, batch).array();
    const auto o = k.gates.block(3 * H, col, H, batch).array();
    const auto tc = k.tanh_c.middleCols(col, batch).array();
    const auto cp = k.cprev_all.middleCols(col, batch).array();

    const Eigen::ArrayXXd dh = dh_all.middleCols(col, batch).array() + dh_next.array();
    const Eigen::ArrayXXd dc = dc_next.array() + dh * o * (1.0 - tc.square());
    dz_all.block(0, col, H, batch) = dc * cp * f * (1.0 - f);
    dz_all.block(H, col, H, batch) = dc * g * i * (1.0 - i);
    dz_all.block(2 * H, col, H, batch) = dc * i * (1.0 - g.square());
    dz_all.block(3 * H, col, H, batch) = dh * tc * o * (1.0 - o);
    dc_next = (dc * f).matrix();
    dh_next.noalias() = Wh.transpose() * dz_all.middleCols(col, batch);
  }
  weight.grad.leftCols(H).noalias() += dz_all * k.hprev_all.transpose();
  weight.grad.rightCols(input).noalias() += dz_all * k.x_all.transpose();
  bias.grad.col(0) += dz_all.rowwise().sum();
  return weight.value.rightCols(input).transpose() * dz_all;
}

LstmNet::LstmNet(Config cfg) : cfg_(cfg), head_("head", cfg.hidden, 1) {
  if (cfg.blocks < 1 || cfg.steps < 1 || cfg.features < 1 || cfg.hidden < 1) {
    throw ValidationError("invalid LSTM configuration");
  }
  for (int k = 0; k < cfg.blocks; ++k) {
    const std::string n = std::to_string(k + 1);
    lstm_.emplace_back("lstm" + n, k == 0 ? cfg.features : cfg.hidden, cfg.hidden);
    proj_.emplace_back("linear" + n, cfg.hidden, cfg.hidden);
  }
}

void LstmNet::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < lstm_.size(); ++k) {
    lstm_[k].init(rng);
    proj_[k].init(rng);
  }
  head_.init(rng);
}

std::vector<Param*> LstmNet::parameters() {
  std::vector<Param*> out;
  for (std::size_t k = 0; k < lstm_.size(); ++k) {
    out.push_back(&lstm_[k].weight);
    out.push_back(&lstm_[k].bias);
    out.push_back(&proj_[k].weight);
    out.push_back(&proj_[k].bias);
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

Eigen::MatrixXd LstmNet::to_time_major(const Eigen::MatrixXd& X) const {
  if (X.rows() != cfg_.features * cfg_.steps) throw ValidationError("LSTM input has wrong window size");
  const auto B = X.cols();
  Eigen::MatrixXd out(cfg_.features, cfg_.steps * B);
  for (Eigen::Index t = 0; t < cfg_.steps; ++t) {
    out.middleCols(t * B, B) = X.middleRows(t * cfg_.features, cfg_.features);
  }
  return out;
}

Eigen::RowVectorXd LstmNet::predict(const Eigen::MatrixXd& X) const {
  const auto B = X.cols();
  Eigen::MatrixXd seq = to_time_major(X);
  for (std::size_t k = 0; k < lstm_.size(); ++k) {
    seq = proj_[k].forward(lstm_[k].forward(seq, cfg_.steps, B, nullptr));
  }
  return head_.forward(seq.rightCols(B));
}

double LstmNet::loss_and_grad(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& y, std::mt19937_64* rng) {
  if (X.cols() != y.cols()) throw ValidationError("LSTM batch shape mismatch");
  for (Param* p : parameters()) p->grad.setZero();
  const auto B = X.cols();
  const auto L = cfg_.steps;
  const std::size_t n = lstm_.size();

  std::vector<LstmLayer::Cache> caches(n);
  std::vector<Eigen::MatrixXd> h_seq(n), masks(n);
  Eigen::MatrixXd seq = to_time_major(X);
  for (std::size_t k = 0; k < n; ++k) {
    h_seq[k] = lstm_[k].forward(seq, L, B, &caches[k]);
    seq = proj_[k].forward(h_seq[k]);
    if (rng) {
      masks[k] = dropout_mask(seq.rows(), seq.cols(), cfg_.dropout, *rng);
      seq = seq.cwiseProduct(masks[k]);
    }
  }
  const Eigen::MatrixXd last = seq.rightCols(B);
  const Eigen::RowVectorXd out = head_.forward(last);
  const Eigen::RowVectorXd err = out - y;
  const double loss = err.squaredNorm() / static_cast<double>(B);

  Eigen::MatrixXd dseq = Eigen::MatrixXd::Zero(cfg_.hidden, L * B);
  dseq.rightCols(B) = head_.backward(last, (2.0 / static_cast<double>(B)) * err);
  for (std::size_t k = n; k-- > 0;) {
    if (rng) dseq = dseq.cwiseProduct(masks[k]);
    const Eigen::MatrixXd dh = proj_[k].backward(h_seq[k], dseq);
    dseq = lstm_[k].backward(caches[k], dh, L, B);
  }
  return loss;
}

}  // namespace llmctl::nn
