#include "llmctl/evalreport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace llmctl {

RunMetrics compute_metrics(const std::string& name, std::span<const RunRow> rows) {
  if (rows.empty()) throw ValidationError("cannot compute metrics of an empty run");
  RunMetrics m;
  m.name = name;
  for (const auto& r : rows) {
    m.mae += std::abs(r.T - r.target);
    m.heater_mean += r.u.heater();
    m.fan_fraction += r.u.fan_on();
    m.fallback_fraction += r.fallback ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(rows.size());
  m.mae /= n;
  m.heater_mean /= n;
  m.fan_fraction /= n;
  m.fallback_fraction /= n;
  return m;
}

RunMetrics compute_metrics(const RunLog& log) { return compute_metrics(log.controller, log.rows); }

double settled_mae(std::span<const RunRow> rows, int skip) {
  double sum = 0;
  std::size_t n = 0;
  int since_change = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k == 0 || rows[k].target != rows[k - 1].target) since_change = 0;
    if (since_change++ < skip) continue;
    sum += std::abs(rows[k].T - rows[k].target);
    ++n;
  }
  if (n == 0) throw ValidationError("no settled ticks to score");
  return sum / static_cast<double>(n);
}

std::vector<ModelError> model_intercomparison(const std::vector<NamedPredictor>& models,
                                              const std::vector<Episode>& test, std::size_t lookback) {
  if (test.empty()) throw ValidationError("no test episodes");
  std::vector<WindowSample> pairs;
  for (const auto& ep : test) {
    auto w = make_windows(ep, lookback);
    pairs.insert(pairs.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  std::vector<std::vector<StateSample>> histories;
  histories.reserve(pairs.size());
  for (const auto& p : pairs) histories.push_back(p.features);

  std::vector<ModelError> out;
  for (const auto& [name, model] : models) {
    if (!model) throw ValidationError("model '" + name + "' is not trained");
    // Chunked so the batched models keep their working set small.
    double sum = 0;
    const std::size_t chunk = 512;
    for (std::size_t s = 0; s < histories.size(); s += chunk) {
      const std::size_t n = std::min(chunk, histories.size() - s);
      const auto pred = model->predict_next_batch(std::span(histories).subspan(s, n));
      for (std::size_t k = 0; k < n; ++k) sum += std::abs(pred[k] - pairs[s + k].label);
    }
    out.push_back({name, sum / static_cast<double>(pairs.size()), pairs.size()});
  }
  return out;
}

void write_model_table(const std::vector<ModelError>& table, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "model,mae,pairs\n";
  char buf[64];
  for (const auto& e : table) {
    std::snprintf(buf, sizeof buf, "%.17g", e.mae);
    f << e.model << ',' << buf << ',' << e.pairs << '\n';
  }
}

std::vector<PenaltyDelta> penalty_deltas(const std::vector<RunMetrics>& metrics) {
  std::map<std::string, const RunMetrics*> by_name;
  for (const auto& m : metrics) by_name[m.name] = &m;
  std::vector<PenaltyDelta> out;
  for (const auto& m : metrics) {
    if (m.name.size() > 2 && m.name.ends_with("-P")) continue;
    const auto it = by_name.find(m.name + "-P");
    if (it == by_name.end()) continue;
    const auto& p = *it->second;
    out.push_back({m.name, p.name, p.fan_fraction - m.fan_fraction, p.heater_mean - m.heater_mean, p.mae - m.mae});
  }
  return out;
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_report(const std::vector<RunMetrics>& metrics, const std::filesystem::path& dir) {
  if (metrics.empty()) throw ValidationError("report needs at least one metrics entry");
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "metrics.csv");
    if (!f) throw IoError("cannot write " + (dir / "metrics.csv").string());
    f << "name,mae,heater_mean,fan_fraction,fallback_fraction\n";
    for (const auto& m : metrics) {
      f << m.name << ',' << g17(m.mae) << ',' << g17(m.heater_mean) << ',' << g17(m.fan_fraction) << ','
        << g17(m.fallback_fraction) << '\n';
    }
  }
  const auto deltas = penalty_deltas(metrics);
  {
    std::ofstream f(dir / "penalty_deltas.csv");
    f << "base,penalized,fan_change,heater_change,mae_change\n";
    for (const auto& d : deltas) {
      f << d.base << ',' << d.penalized << ',' << g17(d.fan_change) << ',' << g17(d.heater_change) << ','
        << g17(d.mae_change) << '\n';
    }
  }
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& m : metrics) {
    runs.push_back({{"name", m.name}, {"mae", m.mae}, {"heater_mean", m.heater_mean},
                    {"fan_fraction", m.fan_fraction}, {"fallback_fraction", m.fallback_fraction}});
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& d : deltas) {
    pairs.push_back({{"base", d.base}, {"penalized", d.penalized}, {"fan_change", d.fan_change},
                     {"heater_change", d.heater_change}, {"mae_change", d.mae_change}});
  }
  const auto best = std::min_element(metrics.begin(), metrics.end(),
                                     [](const RunMetrics& a, const RunMetrics& b) { return a.mae < b.mae; });
  const nlohmann::json summary{{"runs", runs},
                               {"penalty_pairs", pairs},
                               {"best_mae", best->name},
                               {"mae_definition", "mean |T - target| over every tick, start-up included"}};
  std::ofstream f(dir / "summary.json");
  f << summary.dump(2) << '\n';
  if (!f) throw IoError("cannot write " + (dir / "summary.json").string());
}

std::vector<RunMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != "name,mae,heater_mean,fan_fraction,fallback_fraction") {
    throw IoError(path.string() + ": unexpected header");
  }
  std::vector<RunMetrics> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, a, b, c, d;
    std::getline(ss, name, ',');
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    std::getline(ss, d, ',');
    out.push_back({name, std::stod(a), std::stod(b), std::stod(c), std::stod(d)});
  }
  return out;
}

}  // namespace llmctl
