#pragma once

// Subframe-granular downlink simulator: random-waypoint group mobility,
// per-member Rayleigh fading, opportunistic relay election, weighted
// round-robin scheduling and ABS pattern execution.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "absf/asymptotic.hpp"
#include "absf/optimizer.hpp"
#include "absf/states.hpp"

namespace absf {

enum class PolicyKind { legacy, fixed_ratio, asymptotic_pf, dynamic_pf, max_throughput };

struct Policy {
  PolicyKind kind = PolicyKind::legacy;
  int used = 8;   // fixed_ratio only: active subframes per block
  int total = 8;  // fixed_ratio only: block length

  /// "legacy", "fixed-4/8", "asymptotic-pf", "dynamic-pf", "max-throughput".
  static Policy parse(const std::string& name);
  std::string name() const;
};

struct SimConfig {
  double duration_s = 500.0;
  double subframe_s = 1e-3;
  std::uint64_t seed = 1;
  bool mobile = true;
  double speed_min_mps = 1.0;
  double speed_max_mps = 10.0;
  double pause_s = 0.0;
  double mobility_step_s = 0.01;
  double interval_s = 0.5;  // re-optimisation period T
  std::size_t history_window = 20;
  std::vector<double> alpha;  // window+1 coefficients, empty -> all ones
  bool closed_loop_history = true;
  std::size_t pattern_length = 80;
  EfficiencyMode efficiency_mode = EfficiencyMode::centroid;
  double raster_resolution_m = 2.0;
  std::size_t share_mc_trials = 100000;
  ShareMethod share_method = ShareMethod::automatic;
  bool share_per_state = false;  // see ShareOptions::per_state_coverage
  double jfi_window_s = 10.5;
  std::size_t batches = 20;
  double series_step_s = 1.0;

  void validate() const;
  std::size_t subframes() const;
  std::size_t subframes_per_interval() const;
};

/// Per-group random-waypoint state; the centroid moves, members follow.
struct RwpState {
  struct Leg {
    Point waypoint = Point::Zero();
    double speed = 1.0;
    double pause_left = 0.0;
  };
  std::vector<Leg> legs;
};

class RandomWaypoint {
public:
  RandomWaypoint(World world, double speed_min, double speed_max, double pause_s,
                 std::uint64_t seed);

  RwpState init(const Snapshot& snapshot);
  /// Move every centroid toward its waypoint for `dt` seconds; on arrival a
  /// new uniform waypoint and uniform speed are drawn.
  void step(Snapshot& snapshot, RwpState& state, double dt);

private:
  RwpState::Leg new_leg();

  World world_;
  double speed_min_, speed_max_, pause_s_;
  std::mt19937_64 rng_;
};

/// Smooth weighted round robin per cell with group sizes as weights. Over any
/// window with fixed membership every group is served in proportion to its
/// weight within one round.
class WrrScheduler {
public:
  WrrScheduler(std::size_t n_stations, std::size_t n_groups);
  int pick(std::size_t station, std::span<const int> candidates, std::span<const int> weights);

private:
  std::size_t n_groups_;
  std::vector<double> credit_;  // station-major
};

class Simulator {
public:
  Simulator(const Network& network, Snapshot initial, const SimConfig& config);

  /// Serve one subframe in `state`; returns bits delivered per group.
  const Eigen::VectorXd& step_subframe(AbsState state);
  void step_mobility(double dt);

  const Snapshot& snapshot() const { return snapshot_; }
  std::size_t subframe_index() const { return subframe_; }
  /// Cells that had at least one associated group in the last subframe.
  std::size_t last_busy_cells() const { return last_busy_; }
  /// Group served by each station in the last subframe (-1 if none).
  const std::vector<int>& last_served() const { return last_served_; }

private:
  void refresh_geometry();

  const Network& network_;
  Snapshot snapshot_;
  SimConfig config_;
  RandomWaypoint mobility_;
  RwpState rwp_;
  WrrScheduler wrr_;
  std::vector<Eigen::MatrixXd> member_power_;  // per group: stations x members
  std::vector<std::vector<int>> preference_;
  std::vector<int> sizes_;
  std::vector<std::vector<int>> candidates_;
  std::vector<int> last_served_;
  Eigen::VectorXd bits_;
  std::size_t subframe_ = 0;
  std::size_t last_busy_ = 0;
  std::uint64_t fading_key_;
};

/// (sum x)^2 / (n sum x^2). Throws std::domain_error for empty, negative or
/// all-zero input.
double jain_index(std::span<const double> values);

/// Mean and 95% confidence interval from batch means.
struct Interval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};
Interval batch_means_ci(std::span<const double> batch_values);
/// Two-sided 97.5% Student t quantile.
double student_t_975(std::size_t dof);

/// Long-run per-user JFI from per-batch group bits (groups x batches) with a
/// delete-one-batch jackknife interval.
Interval jain_jackknife(const Eigen::MatrixXd& batch_group_bits, std::span<const int> group_sizes);

struct MetricsReport {
  std::string policy;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  double series_step_s = 1.0;
  std::vector<int> group_sizes;
  Eigen::MatrixXd series;            // groups x time steps, bit/s
  Eigen::VectorXd group_throughput;  // long-run bit/s per group
  Interval system_throughput;
  /// Per-user JFI of run-average throughputs; CI by delete-one-batch jackknife.
  Interval jfi;
  /// Mean per-user JFI over windows of jfi_window_s; CI by batch means.
  Interval jfi_windowed;
  std::vector<double> jfi_windows;
  std::size_t served_subframes = 0;
  std::size_t busy_cell_subframes = 0;
  Eigen::VectorXd scheduled_subframes;  // per group
  std::size_t solver_unconverged = 0;

  /// Per-user long-run throughputs (each member gets group / U_c).
  std::vector<double> user_throughput() const;
  /// CSV `time_s,group_id,throughput_bps`.
  void save_timeseries_csv(const std::string& path) const;
};

/// Inputs shared by all runs of a scenario.
struct ExperimentSetup {
  const Network* network = nullptr;
  Snapshot initial;
  SimConfig config;
  std::vector<AbsState> states;  // empty -> full enumeration
  /// Optional precomputed asymptotic throughput matrix (groups x states).
  std::optional<Eigen::MatrixXd> asymptotic_gain;
};

MetricsReport run_experiment(const ExperimentSetup& setup, const Policy& policy);

/// Asymptotic throughput matrix for groups whose centroids are uniform over
/// the world (homogeneous scenario).
Eigen::MatrixXd uniform_asymptotic_gain(const Network& network, std::span<const int> group_sizes,
                                        std::span<const AbsState> states,
                                        const SimConfig& config);

/// Long-run simulation of one fixed state with static groups.
struct StaticStateResult {
  Interval system_throughput;
  Eigen::VectorXd group_throughput;
};
StaticStateResult simulate_static_state(const Network& network, const Snapshot& snapshot,
                                        AbsState state, const SimConfig& config);

}  // namespace absf
