#include "llmctl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace llmctl {

EpochSeconds Episode::end() const {
  return rows.empty() ? start : start + static_cast<EpochSeconds>(std::llround(rows.back().t - rows.front().t));
}

void Episode::validate() const {
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (std::abs(rows[k].t - rows[k - 1].t - kControlPeriod) > 1e-9) {
      throw DatasetError("episode " + id + ": row " + std::to_string(k) + " breaks the 60 s spacing");
    }
  }
}

std::vector<ControlSchedule> generate_excitation(int num_episodes, int minutes_per_episode, std::uint64_t seed) {
  if (num_episodes < 1) throw ValidationError("num_episodes must be >= 1");
  if (minutes_per_episode < 1) throw ValidationError("minutes_per_episode must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> duty(0, kDutyGridSteps);
  std::uniform_int_distribution<int> duty_dwell(5, 20);
  std::uniform_int_distribution<int> fan_dwell(5, 30);
  std::bernoulli_distribution fan_start(0.3);

  std::vector<ControlSchedule> out;
  out.reserve(num_episodes);
  for (int e = 0; e < num_episodes; ++e) {
    ControlSchedule s;
    s.reserve(minutes_per_episode);
    int steps = duty(rng);
    bool fan = fan_start(rng);
    int duty_left = duty_dwell(rng);
    int fan_left = fan_dwell(rng);
    for (int m = 0; m < minutes_per_episode; ++m) {
      if (duty_left == 0) {
        steps = duty(rng);
        duty_left = duty_dwell(rng);
      }
      if (fan_left == 0) {
        fan = !fan;
        fan_left = fan_dwell(rng);
      }
      s.push_back(ControlInput::from_steps(steps, fan));
      --duty_left;
      --fan_left;
    }
    out.push_back(std::move(s));
  }
  return out;
}

Episode simulate_episode(std::string id, const ControlSchedule& schedule, const PlantConfig& plant, double T0,
                         std::uint64_t noise_seed, EpochSeconds start) {
  TruthPlant truth(plant.params, plant.ambient, T0, noise_seed);
  Episode ep;
  ep.id = std::move(id);
  ep.start = start;
  ep.rows.reserve(schedule.size());
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    ep.rows.push_back({truth.latent().t, truth.measured(), truth.latent().T_amb, schedule[k]});
    if (k + 1 < schedule.size()) truth.step(schedule[k]);
  }
  return ep;
}

std::vector<Episode> generate_dataset(int num_episodes, int minutes_per_episode, const PlantConfig& plant,
                                      std::uint64_t seed, EpochSeconds start) {
  const auto schedules = generate_excitation(num_episodes, minutes_per_episode, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> offset(0.0, 4.0);
  std::vector<Episode> out;
  EpochSeconds t0 = start;
  for (std::size_t e = 0; e < schedules.size(); ++e) {
    char id[32];
    std::snprintf(id, sizeof id, "excitation-%03zu", e);
    const double T0 = plant.ambient.at(0.0) + offset(rng);
    out.push_back(simulate_episode(id, schedules[e], plant, T0, rng(), t0));
    // Episodes are laid end to end with an hour gap so time windows never overlap.
    t0 = out.back().end() + 3600;
  }
  return out;
}

std::vector<WindowSample> make_windows(const Episode& episode, std::size_t lookback) {
  if (lookback == 0) throw DatasetError("lookback must be >= 1");
  if (episode.rows.size() <= lookback) {
    throw DatasetError("episode " + episode.id + " has " + std::to_string(episode.rows.size()) +
                       " rows; need more than lookback " + std::to_string(lookback));
  }
  std::vector<WindowSample> out;
  out.reserve(episode.rows.size() - lookback);
  for (std::size_t k = 0; k + lookback < episode.rows.size(); ++k) {
    WindowSample w;
    w.features.reserve(lookback);
    for (std::size_t j = k; j < k + lookback; ++j) {
      const auto& r = episode.rows[j];
      w.features.push_back({r.T, r.T_amb, r.u});
    }
    w.label = episode.rows[k + lookback].T;
    w.label_t = episode.rows[k + lookback].t;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<ResidualSample> make_costa_samples(const Episode& episode, const PlantParams& params) {
  if (episode.rows.size() < 2) throw DatasetError("episode " + episode.id + " needs at least 2 rows");
  std::vector<ResidualSample> out;
  out.reserve(episode.rows.size() - 1);
  for (std::size_t k = 0; k + 1 < episode.rows.size(); ++k) {
    const auto& now = episode.rows[k];
    const auto& next = episode.rows[k + 1];
    ResidualSample s;
    s.T_start = now.T;
    s.T_amb = now.T_amb;
    s.u = now.u;
    s.T_next = next.T;
    s.T_hat = pbm_solve(now.T, now.T_amb, now.u, params);
    s.r = (next.T - s.T_hat) / pbm_source_gain(now.T, now.T_amb, now.u, params);
    out.push_back(s);
  }
  return out;
}

void write_episode_csv(const Episode& episode, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "t,T,T_amb,u_h,u_f\n";
  char buf[128];
  for (const auto& r : episode.rows) {
    std::snprintf(buf, sizeof buf, "%.0f,%.17g,%.17g,%.2f,%d\n", r.t, r.T, r.T_amb, r.u.heater(), r.u.fan_on());
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Episode read_episode_csv(const std::filesystem::path& path, std::string id, EpochSeconds start) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,T,T_amb,u_h,u_f") throw DatasetError(path.string() + ": unexpected header '" + line + "'");
  Episode ep;
  ep.id = std::move(id);
  ep.start = start;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string cell;
    double v[5];
    for (int c = 0; c < 5; ++c) {
      if (!std::getline(ls, cell, ',')) throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": missing column");
      try {
        v[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    ep.rows.push_back({v[0], v[1], v[2], ControlInput::exact(v[3], static_cast<int>(v[4]))});
  }
  ep.validate();
  return ep;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw DatasetError("unknown split '" + s + "'");
}

std::vector<Split> assign_splits(std::size_t n, double test_fraction, double val_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * (n - n_test)));
  std::vector<Split> out(n, Split::Train);
  for (std::size_t k = 0; k < n_test && k < n; ++k) out[order[k]] = Split::Test;
  for (std::size_t k = n_test; k < n_test + n_val && k < n; ++k) out[order[k]] = Split::Validation;
  return out;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = m.version;
  j["lookback"] = m.lookback;
  j["sampling_interval_s"] = kControlPeriod;
  auto& eps = j["episodes"] = nlohmann::json::array();
  for (const auto& e : m.episodes) {
    eps.push_back({{"id", e.id}, {"file", e.file}, {"split", to_string(e.split)},
                   {"start", format_timestamp(e.start)}, {"rows", e.rows}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.version = j.at("version").get<int>();
    m.lookback = j.at("lookback").get<std::size_t>();
    for (const auto& e : j.at("episodes")) {
      m.episodes.push_back({e.at("id").get<std::string>(), e.at("file").get<std::string>(),
                            split_from_string(e.at("split").get<std::string>()),
                            parse_timestamp(e.at("start").get<std::string>()), e.at("rows").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DatasetError(path.string() + ": " + ex.what());
  }
  return m;
}

DatasetManifest save_dataset(const std::vector<Episode>& episodes, const std::vector<Split>& splits,
                             const std::filesystem::path& dir, std::size_t lookback) {
  if (splits.size() != episodes.size()) throw ValidationError("one split per episode required");
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.lookback = lookback;
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    const std::string file = episodes[k].id + ".csv";
    write_episode_csv(episodes[k], dir / file);
    m.episodes.push_back({episodes[k].id, file, splits[k], episodes[k].start, episodes[k].rows.size()});
  }
  write_manifest(m, dir / "manifest.json");
  return m;
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset d;
  d.manifest = read_manifest(dir / "manifest.json");
  for (const auto& e : d.manifest.episodes) {
    Episode ep = read_episode_csv(dir / e.file, e.id, e.start);
    switch (e.split) {
      case Split::Train: d.train.push_back(std::move(ep)); break;
      case Split::Validation: d.validation.push_back(std::move(ep)); break;
      case Split::Test: d.test.push_back(std::move(ep)); break;
    }
  }
  return d;
}

}  // namespace llmctl
