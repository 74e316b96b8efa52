#pragma once

// Proportional-fair and max-throughput selection of ABS state probabilities,
// and their realisation as per-subframe ABS patterns.

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "absf/states.hpp"

namespace absf {

/// g(c, s) = expected throughput of group c in state s (bit/s); w(c) = weight.
struct ThroughputMatrix {
  Eigen::MatrixXd gain;
  Eigen::VectorXd weights;
  std::vector<AbsState> states;

  Eigen::Index groups() const { return gain.rows(); }
  Eigen::Index n_states() const { return gain.cols(); }
  /// Unit weights and states 0..S-1 when not supplied.
  static ThroughputMatrix from(Eigen::MatrixXd gain, Eigen::VectorXd weights = {},
                               std::vector<AbsState> states = {});
  void validate() const;
};

struct StateProbabilities {
  Eigen::VectorXd p;
  std::vector<AbsState> states;

  /// Throws std::domain_error unless every p_s is in [0,1] and the sum is 1 (1e-9).
  void validate() const;
  /// CSV `state_id,prob`.
  void save_csv(const std::string& path) const;
  static StateProbabilities load_csv(const std::string& path);
};

struct SolverOptions {
  double kkt_tolerance = 1e-6;
  int max_iterations = 10000;
  /// Throw InfeasibleError on an all-zero group instead of dropping it.
  bool strict_infeasible = false;
  bool record_trace = false;
};

struct PfSolution {
  StateProbabilities probabilities;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::size_t> excluded_groups;
  std::vector<double> trace;  // objective per iteration when requested
};

/// sum_c w_c log(offset_c + (G p)_c); -inf if any included term is <= 0.
double pf_objective(const ThroughputMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& p,
                    const Eigen::Ref<const Eigen::VectorXd>& offset);

/// Maximise sum_c w_c log(offset_c + sum_s p_s g_cs) over the simplex by
/// exponentiated-gradient ascent with backtracking.
PfSolution solve_pf(const ThroughputMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& offset,
                    const SolverOptions& options = {});

/// Asymptotic problem: no history offset.
PfSolution solve_asymptotic_pf(const ThroughputMatrix& m, const SolverOptions& options = {});

/// Sliding window of observed per-group interval throughputs with weights
/// alpha_0 (current interval) >= alpha_1 >= ... >= alpha_p >= 0.
class History {
public:
  History(std::size_t window, std::vector<double> alpha);
  /// alpha_k = value for k = 0..window.
  static History constant(std::size_t window = 20, double value = 1.0);

  void push(Eigen::VectorXd interval_throughput);
  void clear() { past_.clear(); }

  std::size_t window() const { return window_; }
  std::size_t size() const { return past_.size(); }
  bool empty() const { return past_.empty(); }
  double current_weight() const { return alpha_.front(); }
  const std::vector<double>& alpha() const { return alpha_; }

  /// sum_{k>=1} alpha_k * throughput observed k intervals ago; zeros of
  /// `groups` length when empty.
  Eigen::VectorXd weighted_sum(Eigen::Index groups) const;

private:
  std::size_t window_;
  std::vector<double> alpha_;
  std::deque<Eigen::VectorXd> past_;  // front = most recent
};

/// Dynamic problem: the current interval enters with weight alpha_0, the
/// history as a constant offset inside each log.
PfSolution solve_dynamic_pf(const ThroughputMatrix& now, const History& history,
                            const SolverOptions& options = {});

/// All mass on argmax_s sum_c w_c g_cs; exact ties split uniformly.
StateProbabilities solve_max_throughput(const ThroughputMatrix& m);

/// One ABS state per subframe.
struct AbsPattern {
  std::vector<AbsState> subframes;
  std::size_t n_stations = 0;

  std::size_t length() const { return subframes.size(); }
  const AbsState& at(std::size_t subframe) const { return subframes[subframe % subframes.size()]; }
  /// Fraction of subframes in which each station is active.
  Eigen::VectorXd activity_ratio() const;
  /// Text file: one line per subframe, comma-separated per-station activity bits.
  void save_txt(const std::string& path) const;
  static AbsPattern load_txt(const std::string& path);
};

/// i.i.d. draws from `p`, deterministic for a given seed.
AbsPattern build_pattern(const StateProbabilities& p, std::size_t n_stations, std::size_t length,
                         std::uint64_t seed);

/// Standard random ABS: every station independently keeps `used` of each
/// `total` subframes at random positions; that block is repeated to fill
/// `length` subframes.
AbsPattern fixed_ratio_pattern(int used, int total, std::size_t n_stations, std::size_t length,
                               std::uint64_t seed);

}  // namespace absf
