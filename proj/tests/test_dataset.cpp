#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "llmctl/dataset.hpp"

using namespace llmctl;

namespace {

Episode constant_episode(std::size_t rows, ControlInput u, const PlantConfig& pc) {
  return simulate_episode("c", ControlSchedule(rows, u), pc, 24.0, 3, 0);
}

std::filesystem::path temp_dir(const char* name) {
  auto d = std::filesystem::temp_directory_path() / ("llmctl_test_" + std::string(name));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("generate_excitation") {
  SUBCASE("full-size corpus shape") {
    const auto s = generate_excitation(15, 212, 11);
    REQUIRE(s.size() == 15);
    for (const auto& e : s) CHECK(e.size() == 212);
  }
  SUBCASE("single step") {
    const auto s = generate_excitation(1, 1, 11);
    REQUIRE(s.size() == 1);
    CHECK(s[0].size() == 1);
  }
  SUBCASE("deterministic per seed") {
    CHECK(generate_excitation(3, 50, 5) == generate_excitation(3, 50, 5));
    CHECK(generate_excitation(3, 50, 5) != generate_excitation(3, 50, 6));
  }
  SUBCASE("piecewise constant with minimum dwell") {
    for (const auto& e : generate_excitation(5, 300, 2)) {
      std::size_t run = 1;
      bool first = true;
      for (std::size_t k = 1; k < e.size(); ++k) {
        if (e[k].fan() != e[k - 1].fan()) {
          if (!first) CHECK(run >= 5);
          first = false;
          run = 1;
        } else {
          ++run;
        }
      }
    }
  }
  CHECK_THROWS_AS(generate_excitation(0, 10, 1), ValidationError);
}

TEST_CASE("make_windows") {
  PlantConfig pc;
  const auto ep = simulate_episode("e", generate_excitation(1, 212, 4)[0], pc, 23.0, 1, 0);
  CHECK(make_windows(ep, 10).size() == 202);

  const auto w = make_windows(constant_episode(11, ControlInput{}, pc), 10);
  CHECK(w.size() == 1);
  CHECK(w[0].label_t == doctest::Approx(w[0].features.size() * 60.0));
  CHECK_THROWS_AS(make_windows(constant_episode(10, ControlInput{}, pc), 10), DatasetError);

  SUBCASE("labels and windows reproduce the series") {
    const auto windows = make_windows(ep, 10);
    std::vector<double> series;
    for (const auto& s : windows.front().features) series.push_back(s.T);
    for (const auto& x : windows) series.push_back(x.label);
    REQUIRE(series.size() == ep.rows.size());
    for (std::size_t k = 0; k < series.size(); ++k) CHECK(series[k] == ep.rows[k].T);
    for (std::size_t k = 0; k < windows.size(); ++k) {
      CHECK(windows[k].label_t == ep.rows[k + 10].t);
      CHECK(windows[k].features.back().u == ep.rows[k + 9].u);
    }
  }
}

TEST_CASE("make_costa_samples") {
  SUBCASE("no mismatch gives zero residual") {
    PlantConfig ideal;
    ideal.params = PlantParams::ideal();
    // The lossless plant only stays bounded while the fan runs.
    ControlSchedule sched;
    for (int k = 0; k < 80; ++k) sched.push_back(k % 3 == 0 ? ControlInput{} : ControlInput::from_steps(k % 21, true));
    const auto ep = simulate_episode("i", sched, ideal, 23.0, 1, 0);
    for (const auto& s : make_costa_samples(ep, ideal.params)) CHECK(std::abs(s.r) < 1e-12);
  }
  SUBCASE("default mismatch under full heat: physics over-predicts") {
    PlantConfig pc;
    pc.params.noise_sigma = 0;
    for (const auto& s : make_costa_samples(constant_episode(30, ControlInput::exact(1.0, 0), pc), pc.params)) {
      CHECK(s.r < 0);
    }
  }
  SUBCASE("two rows give one sample") {
    PlantConfig pc;
    CHECK(make_costa_samples(constant_episode(2, ControlInput{}, pc), pc.params).size() == 1);
    CHECK_THROWS_AS(make_costa_samples(constant_episode(1, ControlInput{}, pc), pc.params), DatasetError);
  }
  SUBCASE("solving with the stored source reproduces the next measurement") {
    PlantConfig pc;  // noisy, fan toggling
    const auto ep = simulate_episode("n", generate_excitation(1, 200, 8)[0], pc, 25.0, 2, 0);
    for (const auto& s : make_costa_samples(ep, pc.params)) {
      CHECK(std::abs(pbm_solve(s.T_start, s.T_amb, s.u, pc.params, 60.0, s.r) - s.T_next) < 1e-9);
    }
  }
}

TEST_CASE("episode csv and manifest persistence") {
  const auto dir = temp_dir("dataset");
  PlantConfig pc;
  const auto eps = generate_dataset(5, 40, pc, 3, parse_timestamp("2025-03-01 12:00:00"));
  CHECK(eps[1].start > eps[0].end());
  const auto splits = assign_splits(eps.size(), 0.2, 0.25, 1);
  save_dataset(eps, splits, dir);

  const auto loaded = load_dataset(dir);
  CHECK(loaded.train.size() + loaded.validation.size() + loaded.test.size() == 5);
  CHECK(loaded.test.size() == 1);
  CHECK(loaded.validation.size() == 1);
  for (const auto& e : loaded.train) {
    const auto& orig = *std::find_if(eps.begin(), eps.end(), [&](const Episode& x) { return x.id == e.id; });
    REQUIRE(orig.rows.size() == e.rows.size());
    CHECK(orig.start == e.start);
    for (std::size_t k = 0; k < e.rows.size(); ++k) {
      CHECK(orig.rows[k].T == e.rows[k].T);
      CHECK(orig.rows[k].u == e.rows[k].u);
    }
  }

  std::ofstream(dir / "bad.csv") << "time,T\n0,1\n";
  CHECK_THROWS_AS(read_episode_csv(dir / "bad.csv", "bad", 0), DatasetError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("episode splits by whole episodes") {
  const auto s = assign_splits(15, 0.2, 0.2, 7);
  CHECK(std::count(s.begin(), s.end(), Split::Test) == 3);
  CHECK(std::count(s.begin(), s.end(), Split::Validation) == 2);
  CHECK(std::count(s.begin(), s.end(), Split::Train) == 10);
  CHECK(s == assign_splits(15, 0.2, 0.2, 7));
}
