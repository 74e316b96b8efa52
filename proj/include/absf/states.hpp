#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "absf/deployment.hpp"
#include "absf/radio.hpp"

namespace absf {

/// Subset of active base stations. The state id is the bitmask itself, so
/// id <-> mask is a bijection over 0 .. 2^|B| - 1.
struct AbsState {
  std::uint64_t mask = 0;

  std::uint64_t id() const { return mask; }
  bool active(std::size_t station) const { return (mask >> station) & 1u; }
  int active_count() const { return __builtin_popcountll(mask); }

  static AbsState from_id(std::uint64_t id) { return {id}; }
  static AbsState all_active(std::size_t n_stations) {
    return {n_stations >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_stations) - 1};
  }

  friend bool operator==(AbsState, AbsState) = default;
};

/// All 2^n states in id order, or (with `max_states` below 2^n) a uniform
/// sample that always contains the all-active and every all-but-one state.
/// Throws ResourceError for n > 20 without a cap.
std::vector<AbsState> enumerate_states(std::size_t n_stations,
                                       std::optional<std::size_t> max_states = std::nullopt,
                                       std::uint64_t seed = 0);

/// A relay group: centre of gravity plus fixed member offsets. U_c = size().
struct Group {
  Point centroid = Point::Zero();
  std::vector<Point> member_offsets{Point::Zero()};

  int size() const { return static_cast<int>(member_offsets.size()); }
  Point member(std::size_t i, const World& world) const {
    return world.clamp(centroid + member_offsets[i]);
  }
};

/// `size` offsets uniform in a disc of `radius_m`; a single member sits on the
/// centroid.
std::vector<Point> random_member_offsets(int size, double radius_m, std::mt19937_64& rng);

struct Snapshot {
  World world;
  std::vector<Group> groups;
  double time_s = 0.0;

  std::size_t size() const { return groups.size(); }
  void validate() const;
};

/// Everything the link model needs besides positions.
struct Network {
  Deployment deployment;
  PathlossModel pathloss;
  double noise_var_w = dbm_to_watt(-101.0);
  NoiseModel noise_model = NoiseModel::squared_gaussian;
  McsTable mcs = McsTable::cqi_default();
  double k_sym = 16.8e6;

  std::size_t n_stations() const { return deployment.size(); }
};

enum class EfficiencyMode { exact, centroid };

/// Per-state association: each group attaches to the active station with the
/// strongest average power at its centroid (ties -> lowest index).
struct CellLoad {
  std::vector<int> serving;      // per group, station index or -1
  std::vector<int> group_size;   // per group, U_c
  std::vector<int> users;        // per station, sum of U_i of attached groups
  std::vector<std::vector<int>> groups_of;  // per station

  bool associated(std::size_t group) const { return serving[group] >= 0; }
};

CellLoad associate(const Snapshot& snapshot, AbsState state, const Deployment& deployment,
                   const PathlossModel& pathloss);

/// D_c = K_sym * U_c / sum U_i over groups sharing c's cell; 0 if unassociated.
double scheduler_share(std::size_t group, const CellLoad& load, double k_sym);

/// Per-group and total throughput in one state (bit/s).
struct StateThroughput {
  Eigen::VectorXd per_group;
  Eigen::VectorXd efficiency;
  double total = 0.0;
  CellLoad load;
};

/// Caches average received powers for one snapshot so that many states can be
/// evaluated cheaply. Holds references: network and snapshot must outlive it.
class SnapshotEvaluator {
public:
  SnapshotEvaluator(const Network& network, const Snapshot& snapshot,
                    EfficiencyMode mode = EfficiencyMode::centroid);

  CellLoad associate(AbsState state) const;
  int serving_station(std::size_t group, AbsState state) const;

  /// zeta_c^s when served by `serving` (caller guarantees it is active).
  double efficiency(std::size_t group, AbsState state, int serving) const;
  double efficiency(std::size_t group, AbsState state) const;

  StateThroughput throughput(AbsState state) const;

  /// rows = groups, cols = states; entry = Gamma_c^s (bit/s).
  Eigen::MatrixXd throughput_matrix(std::span<const AbsState> states) const;

  /// Average received power (W) from each station at each member of `group`
  /// (stations x members) and at its centroid.
  const Eigen::MatrixXd& member_power(std::size_t group) const { return member_power_[group]; }
  Eigen::VectorXd centroid_power(std::size_t group) const { return centroid_power_.col(static_cast<Eigen::Index>(group)); }

private:
  Eigen::ArrayXd receiver_cdf(const Eigen::Ref<const Eigen::VectorXd>& power, AbsState state,
                              int serving) const;

  const Network& network_;
  const Snapshot& snapshot_;
  EfficiencyMode mode_;
  Eigen::MatrixXd centroid_power_;             // stations x groups
  std::vector<Eigen::MatrixXd> member_power_;  // per group: stations x members
  std::vector<std::vector<int>> preference_;   // per group: stations by centroid power
};

/// zeta_c^s for one group; 0 if the group is unassociated in `state`.
double state_efficiency(std::size_t group, const Snapshot& snapshot, AbsState state,
                        const Network& network, EfficiencyMode mode);

/// Gamma_c^s = D_c * zeta_c^s and Gamma^s = sum_c Gamma_c^s.
StateThroughput instantaneous_throughput(const Snapshot& snapshot, AbsState state,
                                         const Network& network, EfficiencyMode mode);

}  // namespace absf
