#include <doctest.h>

#include "gradcheck.hpp"
#include "llmctl/lstm.hpp"
#include "llmctl/mlp.hpp"
#include "llmctl/train.hpp"

using namespace llmctl;
using namespace llmctl::nn;
using testutil::random_matrix;

TEST_CASE("lstm_cell with zero parameters") {
  LstmCellParams p(3, 4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(3, 1, 0.7);
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(4, 1, -0.2);
  Eigen::MatrixXd c(4, 1);
  c << 1.0, -2.0, 0.5, 3.0;
  const auto k = lstm_cell(x, h, c, p);
  for (Eigen::Index r = 0; r < 4; ++r) {
    CHECK(k.f(r) == 0.5);
    CHECK(k.i(r) == 0.5);
    CHECK(k.o(r) == 0.5);
    CHECK(k.g(r) == 0.0);
    CHECK(k.c(r) == doctest::Approx(0.5 * c(r)));
    CHECK(k.h(r) == doctest::Approx(0.5 * std::tanh(0.5 * c(r))));
  }
}

TEST_CASE("lstm_cell forget-gate saturation") {
  std::mt19937_64 rng(3);
  LstmCellParams p(2, 3);
  p.W = random_matrix(12, 5, rng, 0.3);
  p.b = random_matrix(12, 1, rng, 0.3);
  p.b_f().setConstant(50.0);
  const Eigen::MatrixXd x = random_matrix(2, 1, rng), h = random_matrix(3, 1, rng), c = random_matrix(3, 1, rng);
  const auto k = lstm_cell(x, h, c, p);
  for (Eigen::Index r = 0; r < 3; ++r) {
    CHECK(k.f(r) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.c(r) == doctest::Approx(c(r) + k.i(r) * k.g(r)).epsilon(1e-12));
  }
}

TEST_CASE("lstm_cell rejects mismatched dimensions") {
  LstmCellParams p(2, 3);
  CHECK_THROWS_AS(lstm_cell(Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(3, 1), p),
                  ValidationError);
  CHECK_THROWS_AS(lstm_cell(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(3, 1), p),
                  ValidationError);
}

TEST_CASE("lstm_cell gate ranges") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    LstmCellParams p(3, 5);
    p.W = random_matrix(20, 8, rng, 2.0);
    p.b = random_matrix(20, 1, rng, 2.0);
    const auto k = lstm_cell(random_matrix(3, 4, rng, 3.0), random_matrix(5, 4, rng), random_matrix(5, 4, rng, 3.0), p);
    for (const auto* m : {&k.f, &k.i, &k.o}) {
      // Closed bounds: saturated activations round to exactly 0 or 1.
      CHECK((m->array() >= 0.0).all());
      CHECK((m->array() <= 1.0).all());
    }
    CHECK((k.g.array().abs() <= 1.0).all());
    CHECK((k.tanh_c.array().abs() <= 1.0).all());
    CHECK(k.h.allFinite());
  }
}

TEST_CASE("lstm_cell backward matches central differences") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    LstmCellParams p(3, 4);
    p.W = random_matrix(16, 7, rng, 0.5);
    p.b = random_matrix(16, 1, rng, 0.5);
    Eigen::MatrixXd x = random_matrix(3, 2, rng), h = random_matrix(4, 2, rng), c = random_matrix(4, 2, rng);
    // Scalar objective: weighted sum of h and c.
    const Eigen::MatrixXd wh = random_matrix(4, 2, rng), wc = random_matrix(4, 2, rng);
    auto objective = [&]() {
      const auto k = lstm_cell(x, h, c, p);
      return k.h.cwiseProduct(wh).sum() + k.c.cwiseProduct(wc).sum();
    };
    const auto g = lstm_cell_backward(lstm_cell(x, h, c, p), wh, wc, p);
    double diff = 0, norm = 0;
    auto probe = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& analytic) {
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double keep = m.data()[i];
        m.data()[i] = keep + 1e-5;
        const double up = objective();
        m.data()[i] = keep - 1e-5;
        const double down = objective();
        m.data()[i] = keep;
        const double num = (up - down) / 2e-5;
        diff += std::pow(num - analytic.data()[i], 2);
        norm += std::pow(num, 2) + std::pow(analytic.data()[i], 2);
      }
    };
    probe(p.W, g.dW);
    for (Eigen::Index i = 0; i < p.b.size(); ++i) {
      const double keep = p.b(i);
      p.b(i) = keep + 1e-5;
      const double up = objective();
      p.b(i) = keep - 1e-5;
      const double down = objective();
      p.b(i) = keep;
      diff += std::pow((up - down) / 2e-5 - g.db(i), 2);
      norm += std::pow(g.db(i), 2);
    }
    probe(x, g.dx);
    probe(h, g.dh_prev);
    probe(c, g.dc_prev);
    CHECK(std::sqrt(diff) / std::sqrt(norm) < 1e-4);
  }
}

TEST_CASE("MLP gradients match central differences") {
  std::mt19937_64 rng(31);
  for (int point = 0; point < 20; ++point) {
    Mlp net({.input = 4, .hidden = 7, .dropout = 0.2});
    net.init(100 + point);
    const Eigen::MatrixXd X = random_matrix(4, 5, rng);
    const Eigen::RowVectorXd y = random_matrix(1, 5, rng);
    const auto plain = testutil::check_gradients(net, X, y, false, 0, 0, 0);
    CHECK(plain.rel_error < 1e-4);
    const auto masked = testutil::check_gradients(net, X, y, true, 1000 + point, 0, 0);
    CHECK(masked.rel_error < 1e-4);
  }
}

TEST_CASE("LSTM stack gradients match central differences") {
  std::mt19937_64 rng(37);
  for (int point = 0; point < 20; ++point) {
    LstmNet net({.features = 3, .steps = 4, .hidden = 5, .blocks = 3, .dropout = 0.2});
    net.init(200 + point);
    const Eigen::MatrixXd X = random_matrix(12, 3, rng);
    const Eigen::RowVectorXd y = random_matrix(1, 3, rng);
    CHECK(testutil::check_gradients(net, X, y, point % 2 == 1, 2000 + point, 0, 0).rel_error < 1e-4);
  }
  SUBCASE("full-size network, sampled coordinates") {
    LstmNet net;  // 3 x 64, 10 steps
    net.init(5);
    const Eigen::MatrixXd X = random_matrix(30, 2, rng);
    const Eigen::RowVectorXd y = random_matrix(1, 2, rng);
    const auto r = testutil::check_gradients(net, X, y, false, 0, 300, 9);
    CHECK(r.coords == 300);
    CHECK(r.rel_error < 1e-4);
  }
}

TEST_CASE("inference is deterministic") {
  std::mt19937_64 rng(1);
  LstmNet lstm({.features = 3, .steps = 10, .hidden = 16});
  lstm.init(1);
  const Eigen::MatrixXd X = random_matrix(30, 8, rng);
  const Eigen::RowVectorXd a = lstm.predict(X), b = lstm.predict(X);
  CHECK((a.array() == b.array()).all());

  Mlp mlp;
  mlp.init(2);
  const Eigen::MatrixXd Z = random_matrix(4, 8, rng);
  CHECK((mlp.predict(Z).array() == mlp.predict(Z).array()).all());
}

TEST_CASE("batched LSTM forward equals per-sample forward") {
  std::mt19937_64 rng(8);
  LstmNet net({.features = 3, .steps = 6, .hidden = 9});
  net.init(3);
  const Eigen::MatrixXd X = random_matrix(18, 5, rng);
  const Eigen::RowVectorXd all = net.predict(X);
  for (Eigen::Index k = 0; k < 5; ++k) CHECK(net.predict(X.col(k))(0) == doctest::Approx(all(k)).epsilon(1e-12));
}

TEST_CASE("LstmLayer matches chained lstm_cell calls") {
  std::mt19937_64 rng(12);
  LstmLayer layer("l", 2, 3);
  layer.init(rng);
  const Eigen::Index steps = 4, batch = 2;
  const Eigen::MatrixXd x_all = random_matrix(2, steps * batch, rng);
  const Eigen::MatrixXd h_all = layer.forward(x_all, steps, batch, nullptr);
  LstmCellParams p;
  p.W = layer.weight.value;
  p.b = layer.bias.value.col(0);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, batch), c = Eigen::MatrixXd::Zero(3, batch);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto k = lstm_cell(x_all.middleCols(t * batch, batch), h, c, p);
    h = k.h;
    c = k.c;
    CHECK((h - h_all.middleCols(t * batch, batch)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("train_nn") {
  std::mt19937_64 rng(4);
  SUBCASE("a zero target is learned") {
    Mlp net;
    net.init(1);
    TrainData tr{random_matrix(4, 2048, rng), Eigen::RowVectorXd::Zero(2048)};
    TrainData va{random_matrix(4, 64, rng), Eigen::RowVectorXd::Zero(64)};
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.min_delta = 0;
    cfg.patience = 100;
    const auto r = train_nn(net, tr, va, cfg);
    CHECK(r.curve.size() <= 100);
    CHECK(mse(net, tr) < 1e-6);
  }
  SUBCASE("a known linear map of four inputs") {
    const Eigen::RowVector4d w(0.7, -1.2, 0.4, 2.0);
    auto make = [&](Eigen::Index n) {
      TrainData d{random_matrix(4, n, rng), {}};
      d.y = w * d.X;
      d.y.array() += 0.3;
      return d;
    };
    const TrainData tr = make(2000), va = make(400);
    Mlp net({.input = 4, .hidden = 64, .dropout = 0.0});
    net.init(2);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.min_delta = 1e-6;
    cfg.patience = 20;
    cfg.seed = 3;
    const auto r = train_nn(net, tr, va, cfg);
    CHECK(r.best_val_mse < 1e-3);
    CHECK(mse(net, va) == doctest::Approx(r.best_val_mse));
  }
  SUBCASE("forced early stop") {
    Mlp net;
    net.init(1);
    TrainData tr{random_matrix(4, 64, rng), random_matrix(1, 64, rng)};
    TrainConfig cfg;
    cfg.patience = 1;
    cfg.min_delta = 1e9;
    const auto r = train_nn(net, tr, tr, cfg);
    CHECK(r.curve.size() <= 2);
    CHECK(r.early_stopped);
    CHECK(r.best_epoch == 1);
  }
  SUBCASE("divergence reports the epoch") {
    Mlp net;
    net.init(1);
    TrainData tr{random_matrix(4, 64, rng), random_matrix(1, 64, rng)};
    tr.X(0, 5) = std::numeric_limits<double>::quiet_NaN();
    try {
      train_nn(net, tr, tr, TrainConfig{});
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() == 1);
    }
  }
  SUBCASE("deterministic given the seed") {
    TrainData tr{random_matrix(4, 128, rng), random_matrix(1, 128, rng)};
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 77;
    Mlp a, b;
    a.init(9);
    b.init(9);
    const auto ra = train_nn(a, tr, tr, cfg), rb = train_nn(b, tr, tr, cfg);
    CHECK(ra.curve.back().train_mse == rb.curve.back().train_mse);
    CHECK((a.predict(tr.X).array() == b.predict(tr.X).array()).all());
  }
  SUBCASE("invalid configuration") {
    Mlp net;
    TrainData tr{random_matrix(4, 8, rng), random_matrix(1, 8, rng)};
    TrainConfig bad;
    bad.epochs = 0;
    CHECK_THROWS_AS(train_nn(net, tr, tr, bad), ValidationError);
    CHECK_THROWS_AS(train_nn(net, tr, TrainData{}, TrainConfig{}), ValidationError);
  }
}

TEST_CASE("standardizer round trip and constant rows") {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd X = random_matrix(3, 50, rng, 4.0);
  X.row(1).setConstant(22.6);
  const auto s = Standardizer::fit(X);
  CHECK(s.scale(1) == 1.0);
  CHECK((s.inverse(s.transform(X)) - X).cwiseAbs().maxCoeff() < 1e-12);
  const auto j = Standardizer::from_json(s.to_json());
  CHECK(j.mean == s.mean);
}
