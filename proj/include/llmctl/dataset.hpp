#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "llmctl/control.hpp"
#include "llmctl/plantsim.hpp"
#include "llmctl/timefmt.hpp"

namespace llmctl {

/// One sampled row: measured state at t and the control applied from t to t+60 s.
struct EpisodeRow {
  double t = 0;
  double T = 0;
  double T_amb = 0;
  ControlInput u;
};

struct Episode {
  std::string id;
  EpochSeconds start = 0;  // timestamp of rows.front()
  std::vector<EpisodeRow> rows;

  EpochSeconds end() const;
  /// Rows strictly increasing with exactly 60 s spacing.
  void validate() const;
};

/// Predictor input at one time step. In a history, the last element is the
/// current state and its `u` is the control about to be applied.
struct StateSample {
  double T = 0;
  double T_amb = 0;
  ControlInput u;
};

struct WindowSample {
  std::vector<StateSample> features;  // oldest first
  double label = 0;                   // T at features.back() time + 60 s
  double label_t = 0;
};

struct ResidualSample {
  double T_start = 0;  // measured T_t
  double T_hat = 0;    // uncorrected physics prediction of T_{t+1}
  double T_amb = 0;
  ControlInput u;
  double T_next = 0;   // measured T_{t+1}
  double r = 0;        // corrective source, °C/s
};

using ControlSchedule = std::vector<ControlInput>;

/// Piecewise-constant pseudo-random excitation: duty redrawn uniformly on the
/// grid every 5-20 min, fan toggled after dwells of 5-30 min.
std::vector<ControlSchedule> generate_excitation(int num_episodes, int minutes_per_episode,
                                                 std::uint64_t seed);

/// Runs a schedule on the truth plant, one row per control step.
Episode simulate_episode(std::string id, const ControlSchedule& schedule, const PlantConfig& plant,
                         double T0, std::uint64_t noise_seed, EpochSeconds start);

/// Generates the standard excitation corpus (one episode per schedule).
std::vector<Episode> generate_dataset(int num_episodes, int minutes_per_episode, const PlantConfig& plant,
                                      std::uint64_t seed, EpochSeconds start);

class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Sliding windows with stride 1; throws DatasetError when the episode has
/// no more rows than the lookback.
std::vector<WindowSample> make_windows(const Episode& episode, std::size_t lookback);

/// Residual targets for the corrective source term: r is the constant source
/// that makes the physics solve from T_t land exactly on T_{t+1}.
std::vector<ResidualSample> make_costa_samples(const Episode& episode, const PlantParams& params);

// --- persistence ---------------------------------------------------------

void write_episode_csv(const Episode& episode, const std::filesystem::path& path);
Episode read_episode_csv(const std::filesystem::path& path, std::string id, EpochSeconds start);

enum class Split { Train, Validation, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string id;
  std::string file;  // relative to the manifest directory
  Split split = Split::Train;
  EpochSeconds start = 0;
  std::size_t rows = 0;
};

struct DatasetManifest {
  int version = 1;
  std::size_t lookback = 10;
  std::vector<ManifestEntry> episodes;
};

/// Assigns whole episodes: `test_fraction` to Test, then `val_fraction` of
/// the remainder to Validation. Deterministic given seed.
std::vector<Split> assign_splits(std::size_t n, double test_fraction, double val_fraction, std::uint64_t seed);

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Writes episodes + manifest into `dir`.
DatasetManifest save_dataset(const std::vector<Episode>& episodes, const std::vector<Split>& splits,
                             const std::filesystem::path& dir, std::size_t lookback = 10);

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Episode> train, validation, test;
};
LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace llmctl
