#pragma once

#include <vector>

#include "llmctl/nn.hpp"

namespace llmctl::nn {

/// Gate weights of one LSTM cell. W stacks the forget, input, candidate and
/// output blocks (in that order), each hidden x (hidden + input) acting on
/// the concatenation [h_prev, x].
struct LstmCellParams {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;

  LstmCellParams() = default;
  LstmCellParams(Eigen::Index input, Eigen::Index hidden);

  Eigen::Index hidden() const { return W.rows() / 4; }
  Eigen::Index input() const { return W.cols() - hidden(); }

  auto W_f() { return W.middleRows(0, hidden()); }
  auto W_i() { return W.middleRows(hidden(), hidden()); }
  auto W_c() { return W.middleRows(2 * hidden(), hidden()); }
  auto W_o() { return W.middleRows(3 * hidden(), hidden()); }
  auto b_f() { return b.segment(0, hidden()); }
  auto b_i() { return b.segment(hidden(), hidden()); }
  auto b_c() { return b.segment(2 * hidden(), hidden()); }
  auto b_o() { return b.segment(3 * hidden(), hidden()); }
};

/// Everything one cell step needs for its backward pass. Columns are batch
/// entries.
struct LstmCellCache {
  Eigen::MatrixXd x, h_prev, c_prev;
  Eigen::MatrixXd f, i, g, o;  // activated gates; g is the candidate cell
  Eigen::MatrixXd c, tanh_c, h;
};

struct LstmCellGrads {
  Eigen::MatrixXd dW;
  Eigen::VectorXd db;
  Eigen::MatrixXd dx, dh_prev, dc_prev;
};

/// One LSTM step: f, i, o are sigmoids, the candidate is tanh,
/// c = f*c_prev + i*g and h = o*tanh(c). Throws on dimension mismatch.
LstmCellCache lstm_cell(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& c_prev,
                        const LstmCellParams& params);

/// Backward of lstm_cell given upstream dL/dh and dL/dc.
LstmCellGrads lstm_cell_backward(const LstmCellCache& cache, const Eigen::MatrixXd& dh, const Eigen::MatrixXd& dc,
                                 const LstmCellParams& params);

/// Single LSTM layer run over a whole sequence. Sequences are stored
/// time-major: columns [t*B, (t+1)*B) hold step t for the B batch entries.
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(std::string name, Eigen::Index input, Eigen::Index hidden);

  void init(std::mt19937_64& rng);

  struct Cache {
    Eigen::MatrixXd x_all;      // input x LB
    Eigen::MatrixXd hprev_all;  // hidden x LB
    Eigen::MatrixXd cprev_all;  // hidden x LB
    Eigen::MatrixXd gates;      // 4*hidden x LB, activated
    Eigen::MatrixXd tanh_c;     // hidden x LB
  };

  /// Returns h for every step (hidden x LB). Zero initial state.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x_all, Eigen::Index steps, Eigen::Index batch,
                          Cache* cache) const;
  /// Accumulates weight grads; returns dL/dx_all.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& dh_all, Eigen::Index steps,
                           Eigen::Index batch);

  Param weight;  // 4H x (H + D)
  Param bias;    // 4H x 1
  Eigen::Index hidden = 0;
  Eigen::Index input = 0;
};

struct LstmNetConfig {
  Eigen::Index features = 3;
  Eigen::Index steps = 10;
  Eigen::Index hidden = 64;
  int blocks = 3;
  double dropout = 0.2;
};

/// Stack of (LSTM -> Linear -> Dropout) blocks with a scalar head on the
/// final step. Each sample column holds a flattened, time-major window:
/// row t*F + f is feature f at step t.
class LstmNet final : public Network {
 public:
  using Config = LstmNetConfig;

  explicit LstmNet(Config cfg = {});

  void init(std::uint64_t seed);
  const Config& config() const { return cfg_; }

  std::vector<Param*> parameters() override;
  Eigen::RowVectorXd predict(const Eigen::MatrixXd& X) const override;
  double loss_and_grad(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& y,
                       std::mt19937_64* dropout_rng) override;
  std::size_t input_size() const override { return static_cast<std::size_t>(cfg_.features * cfg_.steps); }

 private:
  Eigen::MatrixXd to_time_major(const Eigen::MatrixXd& X) const;

  Config cfg_;
  std::vector<LstmLayer> lstm_;
  std::vector<Linear> proj_;
  Linear head_;
};

}  // namespace llmctl::nn
