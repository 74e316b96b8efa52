#include "absf/states.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "absf/errors.hpp"

namespace absf {

std::vector<AbsState> enumerate_states(std::size_t n_stations,
                                       std::optional<std::size_t> max_states,
                                       std::uint64_t seed) {
  if (n_stations < 1)
    throw std::domain_error("enumerate_states: need at least one station");
  if (n_stations > 63)
    throw std::domain_error("enumerate_states: at most 63 stations are supported");
  if (n_stations > 20 && !max_states)
    throw ResourceError("enumerate_states: 2^" + std::to_string(n_stations) +
                        " states requested without a cap");

  const bool full = n_stations <= 20 && (!max_states || *max_states >= (std::size_t{1} << n_stations));
  std::vector<AbsState> out;
  if (full) {
    const std::uint64_t count = std::uint64_t{1} << n_stations;
    out.reserve(count);
    for (std::uint64_t id = 0; id < count; ++id)
      out.push_back(AbsState::from_id(id));
    return out;
  }

  const std::size_t cap = *max_states;
  if (cap < n_stations + 1)
    throw std::domain_error("enumerate_states: cap must hold the all-active and all-but-one states");
  const std::uint64_t all = AbsState::all_active(n_stations).mask;
  std::set<std::uint64_t> chosen{all};
  for (std::size_t b = 0; b < n_stations; ++b)
    chosen.insert(all & ~(std::uint64_t{1} << b));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, all);
  while (chosen.size() < cap)
    chosen.insert(pick(rng));
  for (auto id : chosen)
    out.push_back(AbsState::from_id(id));
  return out;
}

std::vector<Point> random_member_offsets(int size, double radius_m, std::mt19937_64& rng) {
  if (size < 1)
    throw std::domain_error("group size must be >= 1");
  std::vector<Point> offsets;
  if (size == 1) {
    offsets.push_back(Point::Zero());
    return offsets;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < size; ++i) {
    const double r = radius_m * std::sqrt(unit(rng));
    const double a = 2.0 * std::numbers::pi * unit(rng);
    offsets.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  return offsets;
}

void Snapshot::validate() const {
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].size() < 1)
      throw std::domain_error("snapshot: group " + std::to_string(c) + " is empty");
    if (!world.contains(groups[c].centroid))
      throw std::domain_error("snapshot: group " + std::to_string(c) +
                              " centroid outside the world rectangle");
  }
}

namespace {

CellLoad make_load(std::size_t n_groups, std::size_t n_stations) {
  CellLoad load;
  load.serving.assign(n_groups, -1);
  load.group_size.assign(n_groups, 0);
  load.users.assign(n_stations, 0);
  load.groups_of.resize(n_stations);
  return load;
}

void attach(CellLoad& load, std::size_t group, int size, int station) {
  load.group_size[group] = size;
  load.serving[group] = station;
  if (station >= 0) {
    load.users[static_cast<std::size_t>(station)] += size;
    load.groups_of[static_cast<std::size_t>(station)].push_back(static_cast<int>(group));
  }
}

}  // namespace

CellLoad associate(const Snapshot& snapshot, AbsState state, const Deployment& deployment,
                   const PathlossModel& pathloss) {
  CellLoad load = make_load(snapshot.size(), deployment.size());
  for (std::size_t c = 0; c < snapshot.size(); ++c) {
    int best = -1;
    double best_power = -1.0;
    for (std::size_t b = 0; b < deployment.size(); ++b) {
      if (!state.active(b))
        continue;
      const double p = mean_rx_power(snapshot.groups[c].centroid, deployment.stations[b], pathloss);
      if (p > best_power) {
        best_power = p;
        best = static_cast<int>(b);
      }
    }
    attach(load, c, snapshot.groups[c].size(), best);
  }
  return load;
}

double scheduler_share(std::size_t group, const CellLoad& load, double k_sym) {
  const int b = load.serving.at(group);
  if (b < 0)
    return 0.0;
  return k_sym * load.group_size[group] / load.users[static_cast<std::size_t>(b)];
}

SnapshotEvaluator::SnapshotEvaluator(const Network& network, const Snapshot& snapshot,
                                     EfficiencyMode mode)
    : network_(network), snapshot_(snapshot), mode_(mode) {
  snapshot.validate();
  const auto n_b = static_cast<Eigen::Index>(network.n_stations());
  const auto n_c = static_cast<Eigen::Index>(snapshot.size());
  const auto& stations = network.deployment.stations;
  centroid_power_.resize(n_b, n_c);
  member_power_.resize(snapshot.size());
  preference_.resize(snapshot.size());
  for (Eigen::Index c = 0; c < n_c; ++c) {
    const Group& g = snapshot.groups[static_cast<std::size_t>(c)];
    auto& mp = member_power_[static_cast<std::size_t>(c)];
    mp.resize(n_b, g.size());
    for (Eigen::Index b = 0; b < n_b; ++b) {
      const auto& bs = stations[static_cast<std::size_t>(b)];
      centroid_power_(b, c) = mean_rx_power(g.centroid, bs, network.pathloss);
      for (int m = 0; m < g.size(); ++m)
        mp(b, m) = mean_rx_power(g.member(static_cast<std::size_t>(m), snapshot.world), bs,
                                 network.pathloss);
    }
    auto& pref = preference_[static_cast<std::size_t>(c)];
    pref.resize(static_cast<std::size_t>(n_b));
    std::iota(pref.begin(), pref.end(), 0);
    std::stable_sort(pref.begin(), pref.end(), [&](int a, int b) {
      return centroid_power_(a, c) > centroid_power_(b, c);
    });
  }
}

int SnapshotEvaluator::serving_station(std::size_t group, AbsState state) const {
  for (int b : preference_[group])
    if (state.active(static_cast<std::size_t>(b)))
      return b;
  return -1;
}

CellLoad SnapshotEvaluator::associate(AbsState state) const {
  CellLoad load = make_load(snapshot_.size(), network_.n_stations());
  for (std::size_t c = 0; c < snapshot_.size(); ++c)
    attach(load, c, snapshot_.groups[c].size(), serving_station(c, state));
  return load;
}

Eigen::ArrayXd SnapshotEvaluator::receiver_cdf(const Eigen::Ref<const Eigen::VectorXd>& power,
                                               AbsState state, int serving) const {
  LinkBudget<double> budget;
  budget.signal_rate = 1.0 / power(serving);
  budget.noise_var = network_.noise_var_w;
  budget.noise_model = network_.noise_model;
  budget.interferer_rates.resize(state.active_count() - 1);
  Eigen::Index j = 0;
  for (Eigen::Index b = 0; b < power.size(); ++b)
    if (b != serving && state.active(static_cast<std::size_t>(b)))
      budget.interferer_rates(j++) = 1.0 / power(b);
  return sinr_cdf_at(network_.mcs.thresholds(), budget);
}

double SnapshotEvaluator::efficiency(std::size_t group, AbsState state, int serving) const {
  if (serving < 0)
    return 0.0;
  Eigen::ArrayXd f;
  if (mode_ == EfficiencyMode::centroid) {
    f = receiver_cdf(centroid_power_.col(static_cast<Eigen::Index>(group)), state, serving)
            .pow(snapshot_.groups[group].size());
  } else {
    const auto& mp = member_power_[group];
    f = Eigen::ArrayXd::Ones(static_cast<Eigen::Index>(network_.mcs.size()));
    for (Eigen::Index m = 0; m < mp.cols(); ++m)
      f *= receiver_cdf(mp.col(m), state, serving);
  }
  return efficiency_from_cdf(f, network_.mcs);
}

double SnapshotEvaluator::efficiency(std::size_t group, AbsState state) const {
  return efficiency(group, state, serving_station(group, state));
}

StateThroughput SnapshotEvaluator::throughput(AbsState state) const {
  StateThroughput out;
  out.load = associate(state);
  const auto n = static_cast<Eigen::Index>(snapshot_.size());
  out.per_group.setZero(n);
  out.efficiency.setZero(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const int b = out.load.serving[cu];
    if (b < 0)
      continue;
    out.efficiency(c) = efficiency(cu, state, b);
    out.per_group(c) = scheduler_share(cu, out.load, network_.k_sym) * out.efficiency(c);
  }
  out.total = out.per_group.sum();
  return out;
}

Eigen::MatrixXd SnapshotEvaluator::throughput_matrix(std::span<const AbsState> states) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(snapshot_.size()),
                    static_cast<Eigen::Index>(states.size()));
  for (std::size_t s = 0; s < states.size(); ++s)
    m.col(static_cast<Eigen::Index>(s)) = throughput(states[s]).per_group;
  return m;
}

double state_efficiency(std::size_t group, const Snapshot& snapshot, AbsState state,
                        const Network& network, EfficiencyMode mode) {
  return SnapshotEvaluator(network, snapshot, mode).efficiency(group, state);
}

StateThroughput instantaneous_throughput(const Snapshot& snapshot, AbsState state,
                                         const Network& network, EfficiencyMode mode) {
  return SnapshotEvaluator(network, snapshot, mode).throughput(state);
}

}  // namespace absf
