#include <doctest.h>

#include <random>

#include "llmctl/arx.hpp"

using namespace llmctl;

namespace {

Episode from_series(const std::vector<double>& T, const std::vector<ControlInput>& u) {
  Episode e;
  e.id = "synthetic";
  for (std::size_t k = 0; k < T.size(); ++k) e.rows.push_back({60.0 * k, T[k], 22.6, u[k]});
  return e;
}

// Series generated by a known ARX(3,3) under random grid inputs.
Episode known_arx_series(const ArxModel& m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> duty(0, 20);
  std::bernoulli_distribution fan(0.4);
  std::vector<double> T{25.0, 25.3, 25.1};
  std::vector<ControlInput> u;
  for (std::size_t k = 0; k < n; ++k) u.push_back(ControlInput::from_steps(duty(rng), fan(rng)));
  while (T.size() < n) {
    const std::size_t t = T.size() - 1;
    double y = 0;
    for (std::size_t i = 0; i < 3; ++i) y += m.a[i] * T[t - i];
    for (std::size_t j = 0; j < 3; ++j) y += m.b_h[j] * u[t - j].heater() + m.b_f[j] * u[t - j].fan_on();
    T.push_back(y);
  }
  return from_series(T, u);
}

}  // namespace

TEST_CASE("fit_arx recovers a known noiseless ARX(3,3)") {
  const ArxModel truth{{0.55, 0.2, 0.1}, {2.0, 0.8, 0.3}, {-1.2, -0.4, -0.1}};
  const auto windows = make_windows(known_arx_series(truth, 400, 3), 10);
  const auto fit = fit_arx(windows, 3, 3);
  CHECK(fit.dependent_columns.empty());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(fit.model.a[i] - truth.a[i]) < 1e-6);
    CHECK(std::abs(fit.model.b_h[i] - truth.b_h[i]) < 1e-6);
    CHECK(std::abs(fit.model.b_f[i] - truth.b_f[i]) < 1e-6);
  }
  CHECK(fit.sse < 1e-12);
}

TEST_CASE("fit_arx on a constant series") {
  const auto ep = from_series(std::vector<double>(30, 27.0), std::vector<ControlInput>(30, ControlInput::exact(0.5, 0)));
  const auto windows = make_windows(ep, 5);
  const ArxModel identity{{1.0}, {0.0}, {0.0}};
  CHECK(arx_training_sse(identity, windows) == 0.0);

  const auto fit = fit_arx(windows, 1, 1);
  CHECK(!fit.dependent_columns.empty());
  CHECK(fit.sse < 1e-6);

  try {
    fit_arx(windows, 1, 1, {.strict = true});
    FAIL("expected a singularity error");
  } catch (const ArxSingularError& e) {
    CHECK(e.columns().size() == 2);
    CHECK(std::string(e.what()).find("b_") != std::string::npos);
  }
}

TEST_CASE("fit_arx names the offending columns") {
  std::vector<double> T;
  std::vector<ControlInput> u;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> n(-1, 1);
  for (int k = 0; k < 60; ++k) {
    T.push_back(25 + n(rng));
    u.push_back(ControlInput::from_steps(k % 21, false));  // fan never runs
  }
  const auto windows = make_windows(from_series(T, u), 4);
  try {
    fit_arx(windows, 2, 2, {.strict = true});
    FAIL("expected a singularity error");
  } catch (const ArxSingularError& e) {
    auto cols = e.columns();
    std::sort(cols.begin(), cols.end());
    CHECK(cols == std::vector<std::string>{"b_f_1", "b_f_2"});
  }
}

TEST_CASE("fit_arx needs more samples than unknowns") {
  const ArxModel truth{{0.5, 0.2, 0.1}, {1, 0.5, 0.2}, {-1, -0.3, -0.1}};
  const auto windows = make_windows(known_arx_series(truth, 18, 2), 10);  // 8 windows, 9 unknowns
  CHECK_THROWS_AS(fit_arx(windows, 3, 3), ValidationError);
}

TEST_CASE("arx_predict") {
  const ArxModel m{{1.0}, {2.0}, {-1.0}};
  const double T[] = {27.0};
  const ControlInput u[] = {ControlInput::exact(0.5, 0)};
  CHECK(arx_predict(m, T, u) == doctest::Approx(28.0));

  const ArxModel zero{{0, 0}, {0, 0}, {0, 0}};
  const double T2[] = {20.0, 30.0};
  const ControlInput u2[] = {ControlInput::exact(1.0, 1), ControlInput::exact(0.3, 1)};
  CHECK(arx_predict(zero, T2, u2) == 0.0);
  CHECK_THROWS_AS(arx_predict(zero, std::span<const double>(T2, 1), u2), ValidationError);

  SUBCASE("matches an independent dot product") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> c(-1, 1), temp(15, 40);
    std::uniform_int_distribution<int> duty(0, 20);
    for (int trial = 0; trial < 50; ++trial) {
      ArxModel r;
      for (int i = 0; i < 4; ++i) r.a.push_back(c(rng));
      for (int j = 0; j < 3; ++j) {
        r.b_h.push_back(c(rng));
        r.b_f.push_back(c(rng));
      }
      std::vector<double> Th(6);
      std::vector<ControlInput> uh(6);
      for (auto& x : Th) x = temp(rng);
      for (auto& x : uh) x = ControlInput::from_steps(duty(rng), duty(rng) % 2);
      // regressor vector [T_t, T_{t-1}, ..., u_h,t, ..., u_f,t, ...] against [a, b_h, b_f]
      std::vector<double> phi, theta;
      for (int i = 0; i < 4; ++i) phi.push_back(Th[5 - i]);
      for (int j = 0; j < 3; ++j) phi.push_back(uh[5 - j].heater());
      for (int j = 0; j < 3; ++j) phi.push_back(uh[5 - j].fan_on());
      theta.insert(theta.end(), r.a.begin(), r.a.end());
      theta.insert(theta.end(), r.b_h.begin(), r.b_h.end());
      theta.insert(theta.end(), r.b_f.begin(), r.b_f.end());
      double dot = 0;
      for (std::size_t k = 0; k < phi.size(); ++k) dot += phi[k] * theta[k];
      CHECK(arx_predict(r, Th, uh) == doctest::Approx(dot).epsilon(1e-12));
    }
  }
}

TEST_CASE("fitted ARX is a local SSE minimum") {
  PlantConfig pc;
  const auto ep = simulate_episode("opt", generate_excitation(1, 300, 21)[0], pc, 24.0, 4, 0);
  const auto windows = make_windows(ep, 10);
  const auto fit = fit_arx(windows, 4, 3);
  const double base = arx_training_sse(fit.model, windows);
  CHECK(base == doctest::Approx(fit.sse).epsilon(1e-9));
  for (auto vec : {&ArxModel::a, &ArxModel::b_h, &ArxModel::b_f}) {
    for (std::size_t i = 0; i < (fit.model.*vec).size(); ++i) {
      for (double d : {-1e-3, 1e-3}) {
        ArxModel m = fit.model;
        (m.*vec)[i] += d;
        CHECK(arx_training_sse(m, windows) >= base);
      }
    }
  }
}

TEST_CASE("ArxPredictor reads the trailing history") {
  const ArxModel m{{0.5, 0.25}, {1.0}, {-2.0}};
  ArxPredictor p(m);
  CHECK(p.history_length() == 2);
  std::vector<StateSample> h{{10, 22, ControlInput{}}, {20, 22, ControlInput{}}, {30, 22, ControlInput::exact(0.5, 1)}};
  CHECK(p.predict_next(h) == doctest::Approx(0.5 * 30 + 0.25 * 20 + 0.5 - 2.0));
}
