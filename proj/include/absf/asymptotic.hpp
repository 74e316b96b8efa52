#pragma once

// Time-averaged efficiency and throughput when group centroids follow a
// spatial distribution: raster quadrature of the per-state efficiency, the
// power-set expected scheduler share and its homogeneous binomial form.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "absf/states.hpp"

namespace absf {

/// Discrete spatial measure over centroid positions. Rasters put their mass
/// on cell centres; a point mass keeps its exact location.
class SpatialDistribution {
public:
  static SpatialDistribution uniform(const World& world, double resolution_m);
  static SpatialDistribution point(const World& world, const Point& p);
  /// `mass(row, col)` covers [col*r, (col+1)*r) x [row*r, (row+1)*r).
  /// Normalised on construction; negative mass throws std::domain_error.
  static SpatialDistribution raster(const World& world, double resolution_m,
                                    const Eigen::ArrayXXd& mass);
  /// First line `resolution_m,<r>`, then one comma-separated row per y cell
  /// starting at y = 0.
  static SpatialDistribution load_csv(const std::string& path, const World& world);
  /// "uniform", "point(x,y)" or a raster file path.
  static SpatialDistribution parse(const std::string& spec, const World& world,
                                   double resolution_m);

  const World& world() const { return world_; }
  const std::vector<Point>& points() const { return points_; }
  const Eigen::VectorXd& mass() const { return mass_; }
  /// Raster cell size, 0 for a point mass.
  double resolution() const { return resolution_; }
  std::size_t size() const { return points_.size(); }

private:
  World world_;
  std::vector<Point> points_;
  Eigen::VectorXd mass_;
  double resolution_ = 0.0;
};

/// E[zeta_c^s] = sum over support of mass * zeta_c^s(point), centroid mode.
/// Logs a warning when the raster is coarser than the closest station pair.
double expected_state_efficiency(const SpatialDistribution& dist, int group_size, AbsState state,
                                 const Network& network);

/// sum_s P^s E[zeta_c^s]. `expected_efficiency(s)` pairs with `probabilities(s)`.
/// Throws std::domain_error unless P lies on the simplex (1e-9).
double asymptotic_efficiency(const Eigen::Ref<const Eigen::VectorXd>& expected_efficiency,
                             const Eigen::Ref<const Eigen::VectorXd>& probabilities);

/// Relative change of expected_state_efficiency for a uniform distribution
/// when the raster resolution is halved.
double raster_relative_change(const Network& network, int group_size, AbsState state,
                              double resolution_m);

/// automatic: power set up to `exact_limit` others, else Monte Carlo.
/// convolution: exact for any population, via the distribution of the other
/// groups' user total (sizes are integers).
enum class ShareMethod { automatic, exact, monte_carlo, convolution };

struct ShareOptions {
  ShareMethod method = ShareMethod::automatic;
  std::size_t exact_limit = 22;  // max other groups for power-set enumeration
  std::size_t mc_trials = 200000;
  std::uint64_t seed = 1;
  /// false: p_i(b) from all-active coverage for every state.
  /// true: p_i(b) from the state's own regions, consistent with reassociation.
  bool per_state_coverage = false;
};

struct ShareEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact results
};

/// E[D_c|b] for group c at station b. `coverage(i)` = p_i(b), `sizes(i)` = U_i,
/// both over all groups (c included; its own coverage is ignored).
/// Exact power-set sum up to `exact_limit` other groups, else Monte Carlo.
/// Exact mode beyond the limit throws ResourceError.
ShareEstimate expected_share(std::size_t group, const Eigen::Ref<const Eigen::VectorXd>& coverage,
                             std::span<const int> sizes, double k_sym,
                             const ShareOptions& options = {});

/// Homogeneous closed form: all |C| groups equal in size and coverage p.
double expected_share_homogeneous(std::size_t n_groups, double coverage, double k_sym);

struct AsymptoticGroup {
  std::shared_ptr<const SpatialDistribution> distribution;
  int size = 1;
};

/// Per-state expected efficiency and throughput for a population of groups.
/// None of these quantities depend on state probabilities.
class AsymptoticModel {
public:
  AsymptoticModel(const Network& network, std::vector<AsymptoticGroup> groups,
                  ShareOptions share_options = {});

  std::size_t n_groups() const { return groups_.size(); }
  const std::vector<AsymptoticGroup>& groups() const { return groups_; }

  /// p_c(b) under all-active coverage: groups x stations.
  const Eigen::MatrixXd& coverage() const { return coverage_; }
  /// E[D_c|b]: groups x stations.
  const Eigen::MatrixXd& expected_shares() const { return shares_; }
  /// Standard errors of expected_shares() (zero where exact).
  const Eigen::MatrixXd& share_std_errors() const { return share_err_; }

  double expected_state_efficiency(std::size_t group, AbsState state) const;
  /// E[Gamma_c^s] = sum_{b active} E[D_c|b] * integral over A_b of L_c zeta_c^s.
  double expected_state_throughput(std::size_t group, AbsState state) const;

  /// groups x states, E[Gamma_c^s] and E[zeta_c^s].
  Eigen::MatrixXd throughput_matrix(std::span<const AbsState> states) const;
  Eigen::MatrixXd efficiency_matrix(std::span<const AbsState> states) const;

private:
  struct StateFields;
  StateFields evaluate(AbsState state) const;
  void fill_shares(const Eigen::MatrixXd& coverage, Eigen::MatrixXd& shares,
                   Eigen::MatrixXd& errors) const;

  const Network& network_;
  std::vector<AsymptoticGroup> groups_;
  ShareOptions share_options_;
  std::vector<int> sizes_;
  std::vector<const SpatialDistribution*> distributions_;  // distinct
  std::vector<std::size_t> dist_of_;                       // group -> distribution index
  std::vector<Eigen::MatrixXd> power_;                     // per distribution: points x stations
  Eigen::MatrixXd coverage_;
  Eigen::MatrixXd shares_;
  Eigen::MatrixXd share_err_;
};

/// sum_s P^s E[Gamma_c^s] for each group, i.e. matrix * P.
Eigen::VectorXd asymptotic_throughput(const Eigen::Ref<const Eigen::MatrixXd>& expected_throughput,
                                      const Eigen::Ref<const Eigen::VectorXd>& probabilities);

}  // namespace absf
