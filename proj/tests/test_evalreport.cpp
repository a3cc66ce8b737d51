#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "llmctl/evalreport.hpp"

using namespace llmctl;
namespace fs = std::filesystem;

namespace {

RunRow row(double T, double target, double heater = 0, int fan = 0, bool fallback = false) {
  RunRow r;
  r.T = T;
  r.target = target;
  r.u = ControlInput::from_steps(static_cast<int>(std::lround(heater * kDutyGridSteps)), fan != 0);
  r.fallback = fallback;
  return r;
}

fs::path temp_dir(const char* tag) {
  auto p = fs::temp_directory_path() / (std::string("llmctl_eval_") + tag + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

/// Predicts a fixed offset from the current temperature.
class OffsetPredictor final : public Predictor {
 public:
  explicit OffsetPredictor(double d) : d_(d) {}
  std::string_view kind() const override { return "offset"; }
  std::size_t history_length() const override { return 1; }
  double predict_next(std::span<const StateSample> h) const override { return h.back().T + d_; }

 private:
  double d_;
};

}  // namespace

TEST_CASE("compute_metrics examples") {
  SUBCASE("perfect tracking") {
    std::vector<RunRow> rows{row(25, 25), row(26, 26), row(24.5, 24.5)};
    CHECK(compute_metrics("x", rows).mae == 0.0);
  }
  SUBCASE("alternating fan") {
    std::vector<RunRow> rows;
    for (int k = 0; k < 10; ++k) rows.push_back(row(25, 25, 0.5, k % 2));
    const auto m = compute_metrics("x", rows);
    CHECK(m.fan_fraction == 0.5);
    CHECK(m.heater_mean == doctest::Approx(0.5));
  }
  SUBCASE("three-tick hand log") {
    std::vector<RunRow> rows{row(26, 25, 0.2), row(23, 25, 0.4, 1, true), row(28, 25, 0.0)};
    const auto m = compute_metrics("x", rows);
    CHECK(m.mae == doctest::Approx(2.0));
    CHECK(m.heater_mean == doctest::Approx(0.2));
    CHECK(m.fan_fraction == doctest::Approx(1.0 / 3));
    CHECK(m.fallback_fraction == doctest::Approx(1.0 / 3));
  }
  SUBCASE("empty log") {
    CHECK_THROWS_AS(compute_metrics("x", std::vector<RunRow>{}), ValidationError);
    CHECK_THROWS_AS(compute_metrics(RunLog{}), ValidationError);
  }
}

TEST_CASE("mae is a permutation-invariant brute-force mean") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(25, 2);
  std::uniform_real_distribution<double> uni(0, 1);
  std::uniform_int_distribution<int> steps(0, kDutyGridSteps);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RunRow> rows;
    for (int k = 0; k < 50; ++k) rows.push_back(row(n(rng), n(rng), steps(rng) / 20.0, uni(rng) < 0.3, uni(rng) < 0.1));
    double brute = 0;
    for (const auto& r : rows) brute += std::abs(r.T - r.target);
    brute /= rows.size();
    const auto m = compute_metrics("x", rows);
    CHECK(m.mae == doctest::Approx(brute).epsilon(1e-12));
    for (double f : {m.heater_mean, m.fan_fraction, m.fallback_fraction}) {
      CHECK(f >= 0);
      CHECK(f <= 1);
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    CHECK(compute_metrics("x", rows).mae == doctest::Approx(m.mae).epsilon(1e-12));
  }
}

TEST_CASE("settled mae skips ticks after each target change") {
  std::vector<RunRow> rows;
  for (int k = 0; k < 12; ++k) rows.push_back(row(k < 10 ? 0.0 : 26.0, 25.0));
  for (int k = 0; k < 13; ++k) rows.push_back(row(k < 10 ? 0.0 : 29.0, 30.0));
  // Scored: 2 ticks at error 1 and 3 ticks at error 1.
  CHECK(settled_mae(rows) == doctest::Approx(1.0));
  CHECK(settled_mae(rows, 0) > 10);
  CHECK_THROWS_AS(settled_mae(std::span(rows).first(10)), ValidationError);
}

TEST_CASE("model intercomparison") {
  SUBCASE("physics model against a mismatch-free plant sees only noise") {
    PlantConfig pc;
    pc.params = PlantParams::ideal();
    pc.params.noise_sigma = 0.05;
    ControlSchedule sched;
    for (int k = 0; k < 300; ++k) sched.push_back(k % 3 == 0 ? ControlInput{} : ControlInput::from_steps(k % 21, true));
    const std::vector<Episode> test{simulate_episode("i", sched, pc, 23.0, 9, 0)};
    const auto table = model_intercomparison({{"PBM", std::make_shared<PbmPredictor>(pc.params)}}, test);
    REQUIRE(table.size() == 1);
    CHECK(table[0].pairs == 290);
    // |n1 - a n0| for Gaussian noise: between 0.8 and 1.13 times sigma.
    CHECK(table[0].mae > 0.03);
    CHECK(table[0].mae < 0.07);
  }
  SUBCASE("single pair equals the absolute errors") {
    PlantConfig pc;
    ControlSchedule sched(11, ControlInput::exact(0.3, 0));
    const std::vector<Episode> test{simulate_episode("s", sched, pc, 24.0, 2, 0)};
    const auto& rows = test[0].rows;
    REQUIRE(rows.size() == 11);
    const auto table = model_intercomparison(
        {{"up", std::make_shared<OffsetPredictor>(0.5)}, {"down", std::make_shared<OffsetPredictor>(-0.25)}}, test);
    REQUIRE(table.size() == 2);
    CHECK(table[0].pairs == 1);
    CHECK(table[0].mae == doctest::Approx(std::abs(rows[9].T + 0.5 - rows[10].T)));
    CHECK(table[1].mae == doctest::Approx(std::abs(rows[9].T - 0.25 - rows[10].T)));
  }
  SUBCASE("untrained model and empty test set") {
    PlantConfig pc;
    const std::vector<Episode> test{simulate_episode("s", ControlSchedule(12), pc, 24.0, 2, 0)};
    CHECK_THROWS_AS(model_intercomparison({{"LSTM", nullptr}}, test), ValidationError);
    CHECK_THROWS_AS(model_intercomparison({{"PBM", std::make_shared<PbmPredictor>(pc.params)}}, {}),
                    ValidationError);
  }
}

TEST_CASE("report files") {
  const auto dir = temp_dir("report");
  const std::vector<RunMetrics> metrics{{"LLM-HAM-Te0", 0.31, 0.45, 0.25, 0.0},
                                        {"LLM-HAM-Te0-P", 0.1 + 0.2, 0.22, 0.0, 1.0 / 3},
                                        {"LLM-Te0", 0.2, 0.24, 0.0, 0.0}};
  write_report(metrics, dir);
  CHECK(read_metrics_csv(dir / "metrics.csv") == metrics);

  const auto deltas = penalty_deltas(metrics);
  REQUIRE(deltas.size() == 1);
  CHECK(deltas[0].base == "LLM-HAM-Te0");
  CHECK(deltas[0].penalized == "LLM-HAM-Te0-P");
  CHECK(deltas[0].fan_change == doctest::Approx(-0.25));
  CHECK(deltas[0].heater_change == doctest::Approx(-0.23));

  std::ifstream sf(dir / "summary.json");
  const auto summary = nlohmann::json::parse(sf);
  CHECK(summary["runs"].size() == 3);
  CHECK(summary["best_mae"] == "LLM-Te0");
  CHECK(summary["penalty_pairs"].size() == 1);

  std::ifstream df(dir / "penalty_deltas.csv");
  std::string header, line, extra;
  std::getline(df, header);
  std::getline(df, line);
  CHECK(header == "base,penalized,fan_change,heater_change,mae_change");
  CHECK(line.rfind("LLM-HAM-Te0,LLM-HAM-Te0-P,", 0) == 0);
  CHECK_FALSE(std::getline(df, extra));

  SUBCASE("two entries give a two-row table") {
    const auto two = temp_dir("two");
    write_report({metrics[0], metrics[2]}, two);
    CHECK(read_metrics_csv(two / "metrics.csv").size() == 2);
    fs::remove_all(two);
  }
  CHECK_THROWS_AS(write_report({}, dir), ValidationError);
  CHECK_THROWS_AS(read_metrics_csv(dir / "missing.csv"), IoError);
  fs::remove_all(dir);
}
