#include <CLI11.hpp>

#include <cstdio>
#include <csignal>
#include <iostream>
#include <atomic>
#include <thread>

#include "llmctl/gateway.hpp"
#include "llmctl/workspace.hpp"

using namespace llmctl;
namespace fs = std::filesystem;

namespace {

WorkspaceConfig load_config(const fs::path& workdir, const std::string& config) {
  if (!config.empty()) return WorkspaceConfig::load(config);
  const auto implicit = workdir / "llmctl.json";
  return fs::exists(implicit) ? WorkspaceConfig::load(implicit) : WorkspaceConfig{};
}

/// Cuts the schedule to its first `ticks` control periods.
ReferenceSchedule truncate(ReferenceSchedule s, int ticks) {
  if (ticks <= 0) return s;
  s.duration_s = std::min(s.duration_s, ticks * kControlPeriod);
  while (s.points.size() > 1 && s.points.back().start_s >= s.duration_s) s.points.pop_back();
  return s;
}

RunConfig run_config(const Workspace& ws, std::uint64_t seed, int ticks) {
  RunConfig rc;
  rc.plant = ws.config().plant;
  rc.schedule = truncate(ws.config().schedule, ticks);
  rc.seed = seed;
  rc.output_root = ws.runs_dir();
  return rc;
}

void print_metrics(const RunMetrics& m, const std::vector<RunRow>& rows) {
  std::printf("%-18s mae %.3f", m.name.c_str(), m.mae);
  try {
    std::printf("  settled %.3f", settled_mae(rows));
  } catch (const ValidationError&) {
  }
  std::printf("  heater %.3f  fan %.3f  fallback %.3f\n", m.heater_mean, m.fan_fraction, m.fallback_fraction);
}

fs::path find_run_dir(const Workspace& ws, const std::string& run) {
  if (fs::exists(fs::path(run) / "run.json")) return run;
  if (fs::exists(ws.runs_dir() / run / "run.json")) return ws.runs_dir() / run;
  throw ValidationError("no run '" + run + "' in " + ws.runs_dir().string());
}

std::atomic<bool> interrupted{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop LLM greenhouse control: data, models, runs and the operator service"};
  app.require_subcommand(1);
  std::string workdir = ".";
  std::string config;
  app.add_option("--workdir", workdir, "Workspace directory (data, models, history, runs, reports)");
  app.add_option("--config", config, "JSON config; defaults to <workdir>/llmctl.json when present");

  app.add_subcommand("gen-data", "Generate the excitation dataset and the guide run in history");

  auto* train = app.add_subcommand("train", "Train a predictor and write its checkpoint");
  std::string model;
  train->add_option("--model", model, "arx, lstm or ham")->required()->check(CLI::IsMember({"arx", "lstm", "ham"}));

  app.add_subcommand("eval-models", "One-step MAE of PBM, ARX, LSTM and CoSTA on the test episodes");

  auto* run = app.add_subcommand("run", "Run one controller variant over the reference schedule");
  std::string controller;
  bool penalty = false;
  std::string backend;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int ticks = 0;
  std::string objective;
  run->add_option("--controller", controller, "Variant name, e.g. LLM-HAM-Te0-P")->required();
  run->add_flag("--penalty", penalty, "Add the fan-penalty objective (same as a -P name)");
  run->add_option("--backend", backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  run->add_option("--seed", seed, "Plant noise seed")->each([&](const std::string&) { seed_set = true; });
  run->add_option("--ticks", ticks, "Stop after this many control periods")->check(CLI::PositiveNumber);
  run->add_option("--objective", objective, "Extra instruction appended to every prompt");

  auto* compare = app.add_subcommand("compare", "Run a batch of variants and write a metrics report");
  std::vector<std::string> variants;
  std::string report_name = "compare";
  compare->add_option("--controllers", variants, "Variants (default: every Te0 variant)");
  compare->add_option("--seed", seed, "Plant noise seed")->each([&](const std::string&) { seed_set = true; });
  compare->add_option("--ticks", ticks, "Stop each run after this many control periods")->check(CLI::PositiveNumber);
  compare->add_option("--name", report_name, "Report directory name under reports/");

  auto* show = app.add_subcommand("show-card", "Print the decision card of one tick");
  std::string run_ref;
  int tick = 0;
  show->add_option("run", run_ref, "Run id or run directory")->required();
  show->add_option("tick", tick, "Tick index")->required()->check(CLI::NonNegativeNumber);

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API and event stream");
  int port = 8080;
  std::string host = "127.0.0.1";
  int tick_delay_ms = 1000;
  serve->add_option("--port", port, "Listen port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--tick-delay-ms", tick_delay_ms, "Default pacing between ticks of served runs")
      ->check(CLI::Range(0, 60000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n\n", e.what());
    CLI::App* failed = &app;
    for (auto* sub : app.get_subcommands()) failed = sub;
    std::cerr << failed->help();
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  try {
    auto cfg = load_config(workdir, config);
    if (!backend.empty()) cfg.backend.kind = backend == "remote" ? BackendKind::Remote : BackendKind::Mock;
    Workspace ws(workdir, cfg);
    const std::uint64_t run_seed = seed_set ? seed : cfg.run_seed;

    if (app.got_subcommand("gen-data")) {
      const auto m = ws.generate_data();
      std::size_t rows = 0;
      for (const auto& e : m.episodes) rows += e.rows;
      std::printf("wrote %zu episodes (%zu rows) to %s\n", m.episodes.size(), rows, ws.data_dir().c_str());
      std::printf("guide experiment \"%s\" in %s\n", guide_experiment_id().c_str(), ws.history_dir().c_str());
    } else if (app.got_subcommand("train")) {
      ws.train(model);
      std::printf("wrote %s\n", ws.checkpoint_path(model).c_str());
    } else if (app.got_subcommand("eval-models")) {
      const auto table = ws.evaluate_models();
      fs::create_directories(ws.reports_dir());
      write_model_table(table, ws.reports_dir() / "model_errors.csv");
      for (const auto& e : table) std::printf("%-6s %.4f  (%zu pairs)\n", e.model.c_str(), e.mae, e.pairs);
      std::printf("wrote %s\n", (ws.reports_dir() / "model_errors.csv").c_str());
    } else if (app.got_subcommand("run")) {
      auto name = parse_controller_name(controller);
      name.penalty = name.penalty || penalty;
      const auto reg = ws.registry();
      auto rc = run_config(ws, run_seed, ticks);
      rc.objective = objective;
      const auto log = run_closed_loop(rc, make_controller(name, reg), reg);
      std::printf("run %s: %s, %zu ticks\n", log.run_id.c_str(), log.status.c_str(), log.rows.size());
      print_metrics(compute_metrics(log), log.rows);
      std::printf("wrote %s\n", (ws.runs_dir() / log.run_id).c_str());
      if (log.status != "completed") return 3;
    } else if (app.got_subcommand("compare")) {
      if (variants.empty()) {
        for (const auto& n : all_variants({0.0})) variants.push_back(render_controller_name(n));
      }
      const auto reg = ws.registry();
      std::vector<Controller> controllers;
      for (const auto& v : variants) controllers.push_back(make_controller(v, reg));
      std::vector<RunMetrics> metrics;
      for (auto& c : controllers) {
        const auto log = run_closed_loop(run_config(ws, run_seed, ticks), c, reg);
        metrics.push_back(compute_metrics(log));
        print_metrics(metrics.back(), log.rows);
      }
      const auto dir = ws.reports_dir() / report_name;
      write_report(metrics, dir);
      for (const auto& d : penalty_deltas(metrics)) {
        std::printf("%s -> %s: fan %+.3f  heater %+.3f  mae %+.3f\n", d.base.c_str(), d.penalized.c_str(),
                    d.fan_change, d.heater_change, d.mae_change);
      }
      std::printf("wrote %s\n", dir.c_str());
    } else if (app.got_subcommand("show-card")) {
      const auto log = load_run(find_run_dir(ws, run_ref));
      if (tick >= static_cast<int>(log.cards.size())) {
        throw ValidationError("run has " + std::to_string(log.cards.size()) + " cards; tick " + std::to_string(tick) +
                              " is out of range");
      }
      std::fputs(render_card(log.cards[tick]).c_str(), stdout);
    } else if (app.got_subcommand("serve")) {
      GatewayOptions opt;
      opt.host = host;
      opt.port = port;
      opt.runs_root = ws.runs_dir();
      opt.registry = ws.registry();
      opt.defaults.plant = cfg.plant;
      opt.defaults.schedule = cfg.schedule;
      opt.defaults.seed = run_seed;
      opt.tick_delay_ms = tick_delay_ms;
      Gateway gw(opt);
      std::signal(SIGINT, [](int) { interrupted = true; });
      std::signal(SIGTERM, [](int) { interrupted = true; });
      std::jthread watcher([&gw](std::stop_token st) {
        while (!st.stop_requested() && !interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(200));
        if (interrupted) gw.stop();
      });
      std::printf("serving on http://%s:%d\n", host.c_str(), port);
      std::fflush(stdout);
      gw.serve();
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
