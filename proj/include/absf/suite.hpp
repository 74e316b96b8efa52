#pragma once

// Orchestration behind the CLI subcommands. Every entry point writes its
// tables under `out_dir` and returns them for programmatic checks.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "absf/scenario.hpp"

namespace absf {

/// FNV-1a over the canonical JSON dump of the scenario.
std::string config_hash(const Scenario& scenario);

struct RunRecord {
  std::string policy;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Interval system_throughput;
  Interval jfi;
  Interval jfi_windowed;
  std::string timeseries;  // path relative to out_dir
};

struct PooledRow {
  std::string policy;
  std::size_t runs = 0;
  Interval system_throughput;
  Interval jfi;
};

struct SuiteResult {
  std::vector<RunRecord> runs;
  std::vector<PooledRow> pooled;
  bool ok() const;
};

/// Runs every (policy, seed) pair. Failures are recorded, not thrown.
/// Writes runs/<policy>_seed<N>.csv, summary.csv, summary_pooled.csv and
/// manifest.json.
SuiteResult run_suite(const Scenario& scenario, const std::filesystem::path& out_dir);

/// Pool per-seed means into one CI per policy (t interval across seeds; a
/// single seed keeps its batch-means interval).
std::vector<PooledRow> pool_runs(const std::vector<RunRecord>& runs);

struct StateRow {
  AbsState state;
  double instantaneous_bps = 0.0;  // snapshot of `seed`
  double asymptotic_bps = 0.0;     // centroids over the spatial distribution
};

struct GainRow {
  int group_size = 1;
  double mean_group_bps = 0.0;
};

struct AnalysisResult {
  std::vector<StateRow> states;
  std::vector<GainRow> relay_gain;  // all-active state
};

/// Mean all-active group throughput with every group forced to each size in
/// `sizes`, centroids taken from `snapshot` (centroid-mode efficiency).
std::vector<GainRow> relay_gain(const Network& network, const Snapshot& snapshot,
                                const std::vector<int>& sizes);

/// states.csv, groups.csv and relay_gain.csv.
AnalysisResult analyze(const Scenario& scenario, const std::filesystem::path& out_dir,
                       std::uint64_t seed);

/// Asymptotic PF over the scenario's states: probabilities.csv, pattern.txt,
/// optimize.json.
PfSolution optimize(const Scenario& scenario, const std::filesystem::path& out_dir,
                    std::uint64_t seed);

struct ValidationRow {
  int group_size = 1;
  AbsState state;
  double analytical_bps = 0.0;
  /// Same model with the simulator's constant noise, to size that discrepancy.
  double analytical_const_noise_bps = 0.0;
  Interval simulated_bps;

  bool inside() const {
    return analytical_bps >= simulated_bps.low && analytical_bps <= simulated_bps.high;
  }
};

/// Static groups, per-state analytical throughput (exact member model)
/// against a long simulation of that state. Writes validation.csv.
std::vector<ValidationRow> validate_model(const Scenario& scenario,
                                          const std::filesystem::path& out_dir,
                                          std::uint64_t seed);

}  // namespace absf
