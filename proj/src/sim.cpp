#include "absf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <regex>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "absf/asymptotic.hpp"
#include "absf/random.hpp"

namespace absf {

Policy Policy::parse(const std::string& name) {
  if (name == "legacy")
    return {PolicyKind::legacy};
  if (name == "asymptotic-pf")
    return {PolicyKind::asymptotic_pf};
  if (name == "dynamic-pf")
    return {PolicyKind::dynamic_pf};
  if (name == "max-throughput")
    return {PolicyKind::max_throughput};
  static const std::regex fixed_re(R"(fixed-(\d+)/(\d+))");
  std::smatch m;
  if (std::regex_match(name, m, fixed_re)) {
    Policy p{PolicyKind::fixed_ratio, std::stoi(m[1].str()), std::stoi(m[2].str())};
    if (p.total < 1 || p.used < 1 || p.used > p.total)
      throw std::domain_error("fixed-ratio policy '" + name + "': ratio must lie in (0,1]");
    return p;
  }
  throw std::invalid_argument("unknown policy '" + name + "'");
}

std::string Policy::name() const {
  switch (kind) {
    case PolicyKind::legacy: return "legacy";
    case PolicyKind::fixed_ratio: return "fixed-" + std::to_string(used) + "/" + std::to_string(total);
    case PolicyKind::asymptotic_pf: return "asymptotic-pf";
    case PolicyKind::dynamic_pf: return "dynamic-pf";
    case PolicyKind::max_throughput: return "max-throughput";
  }
  return "unknown";
}

void SimConfig::validate() const {
  if (!(duration_s > 0.0))
    throw std::domain_error("sim: duration must be positive");
  if (!(subframe_s > 0.0))
    throw std::domain_error("sim: subframe must be positive");
  if (mobile && !(speed_min_mps > 0.0 && speed_max_mps >= speed_min_mps))
    throw std::domain_error("sim: speeds must be positive with min <= max");
  if (!(mobility_step_s > 0.0) || !(pause_s >= 0.0))
    throw std::domain_error("sim: bad mobility timing");
  const double ratio = interval_s / subframe_s;
  if (!(interval_s > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-6)
    throw std::domain_error("sim: interval must be a multiple of the subframe");
  if (!alpha.empty() && alpha.size() != history_window + 1)
    throw std::domain_error("sim: alpha needs history_window + 1 coefficients");
  if (batches < 2)
    throw std::domain_error("sim: need at least two batches for a confidence interval");
  if (!(jfi_window_s > 0.0) || !(series_step_s > 0.0))
    throw std::domain_error("sim: bad window lengths");
}

std::size_t SimConfig::subframes() const {
  return static_cast<std::size_t>(std::llround(duration_s / subframe_s));
}

std::size_t SimConfig::subframes_per_interval() const {
  return static_cast<std::size_t>(std::llround(interval_s / subframe_s));
}

// ---------------------------------------------------------------------------

RandomWaypoint::RandomWaypoint(World world, double speed_min, double speed_max, double pause_s,
                               std::uint64_t seed)
    : world_(world), speed_min_(speed_min), speed_max_(speed_max), pause_s_(pause_s),
      rng_(make_rng(seed, 0x6d6f62696c65ull)) {}

RwpState::Leg RandomWaypoint::new_leg() {
  std::uniform_real_distribution<double> ux(0.0, world_.width), uy(0.0, world_.height);
  std::uniform_real_distribution<double> us(speed_min_, speed_max_);
  RwpState::Leg leg;
  leg.waypoint = Point(ux(rng_), uy(rng_));
  leg.speed = us(rng_);
  leg.pause_left = 0.0;
  return leg;
}

RwpState RandomWaypoint::init(const Snapshot& snapshot) {
  RwpState state;
  for (std::size_t c = 0; c < snapshot.size(); ++c)
    state.legs.push_back(new_leg());
  return state;
}

void RandomWaypoint::step(Snapshot& snapshot, RwpState& state, double dt) {
  if (!(dt > 0.0))
    throw std::domain_error("mobility step must be positive");
  for (std::size_t c = 0; c < snapshot.size(); ++c) {
    Point& pos = snapshot.groups[c].centroid;
    auto& leg = state.legs[c];
    double left = dt;
    while (left > 0.0) {
      if (leg.pause_left > 0.0) {
        const double wait = std::min(left, leg.pause_left);
        leg.pause_left -= wait;
        left -= wait;
        continue;
      }
      const Point to = leg.waypoint - pos;
      const double dist = to.norm();
      const double reach = leg.speed * left;
      if (reach < dist) {
        pos += to * (reach / dist);
        left = 0.0;
      } else {
        pos = leg.waypoint;
        left -= dist / leg.speed;
        leg = new_leg();
        leg.pause_left = pause_s_;
      }
    }
    pos = world_.clamp(pos);
  }
  snapshot.time_s += dt;
}

// ---------------------------------------------------------------------------

WrrScheduler::WrrScheduler(std::size_t n_stations, std::size_t n_groups)
    : n_groups_(n_groups), credit_(n_stations * n_groups, 0.0) {}

int WrrScheduler::pick(std::size_t station, std::span<const int> candidates,
                       std::span<const int> weights) {
  if (candidates.empty())
    return -1;
  double* credit = credit_.data() + station * n_groups_;
  double total = 0.0;
  int best = -1;
  for (int c : candidates) {
    const double w = weights[static_cast<std::size_t>(c)];
    credit[c] += w;
    total += w;
    if (best < 0 || credit[c] > credit[best])
      best = c;
  }
  credit[best] -= total;
  return best;
}

// ---------------------------------------------------------------------------

Simulator::Simulator(const Network& network, Snapshot initial, const SimConfig& config)
    : network_(network), snapshot_(std::move(initial)), config_(config),
      mobility_(snapshot_.world, config.speed_min_mps, config.speed_max_mps, config.pause_s,
                config.seed),
      wrr_(network.n_stations(), snapshot_.size()),
      fading_key_(mix64(config.seed ^ 0x66616465ull)) {
  config_.validate();
  snapshot_.validate();
  rwp_ = mobility_.init(snapshot_);
  for (const auto& g : snapshot_.groups)
    sizes_.push_back(g.size());
  candidates_.resize(network.n_stations());
  last_served_.assign(network.n_stations(), -1);
  bits_.setZero(static_cast<Eigen::Index>(snapshot_.size()));
  refresh_geometry();
}

void Simulator::refresh_geometry() {
  const auto& stations = network_.deployment.stations;
  const std::size_t n_b = stations.size();
  member_power_.resize(snapshot_.size());
  preference_.resize(snapshot_.size());
  std::vector<double> centroid(n_b);
  for (std::size_t c = 0; c < snapshot_.size(); ++c) {
    const Group& g = snapshot_.groups[c];
    auto& mp = member_power_[c];
    mp.resize(static_cast<Eigen::Index>(n_b), g.size());
    for (std::size_t b = 0; b < n_b; ++b) {
      centroid[b] = mean_rx_power(g.centroid, stations[b], network_.pathloss);
      for (int m = 0; m < g.size(); ++m)
        mp(static_cast<Eigen::Index>(b), m) =
            mean_rx_power(g.member(static_cast<std::size_t>(m), snapshot_.world), stations[b],
                          network_.pathloss);
    }
    auto& pref = preference_[c];
    pref.resize(n_b);
    std::iota(pref.begin(), pref.end(), 0);
    std::stable_sort(pref.begin(), pref.end(),
                     [&](int a, int b) { return centroid[static_cast<std::size_t>(a)] > centroid[static_cast<std::size_t>(b)]; });
  }
}

void Simulator::step_mobility(double dt) {
  mobility_.step(snapshot_, rwp_, dt);
  refresh_geometry();
}

const Eigen::VectorXd& Simulator::step_subframe(AbsState state) {
  bits_.setZero();
  const std::size_t n_b = network_.n_stations();
  for (auto& list : candidates_)
    list.clear();
  for (std::size_t c = 0; c < snapshot_.size(); ++c)
    for (int b : preference_[c])
      if (state.active(static_cast<std::size_t>(b))) {
        candidates_[static_cast<std::size_t>(b)].push_back(static_cast<int>(c));
        break;
      }

  const double bits_per_unit = network_.k_sym * config_.subframe_s;
  const double noise = network_.noise_var_w;
  std::vector<double> fade(n_b);
  last_busy_ = 0;
  for (std::size_t b = 0; b < n_b; ++b) {
    last_served_[b] = -1;
    if (!state.active(b) || candidates_[b].empty())
      continue;
    ++last_busy_;
    const int c = wrr_.pick(b, candidates_[b], sizes_);
    last_served_[b] = c;
    const auto& mp = member_power_[static_cast<std::size_t>(c)];
    CounterStream rng(mix64(fading_key_ ^ mix64(subframe_ * snapshot_.size() + static_cast<std::size_t>(c))));
    double best = 0.0;
    for (Eigen::Index m = 0; m < mp.cols(); ++m) {
      // One draw per station, active or not, keeps the stream aligned across patterns.
      for (std::size_t j = 0; j < n_b; ++j)
        fade[j] = rng.exponential();
      double interference = 0.0;
      for (std::size_t j = 0; j < n_b; ++j)
        if (j != b && state.active(j))
          interference += mp(static_cast<Eigen::Index>(j), m) * fade[j];
      const double sinr = mp(static_cast<Eigen::Index>(b), m) * fade[b] / (interference + noise);
      best = std::max(best, sinr);
    }
    const int k = network_.mcs.select(best);
    if (k >= 0)
      bits_(c) = network_.mcs.bits()(k) * bits_per_unit;
  }
  ++subframe_;
  return bits_;
}

// ---------------------------------------------------------------------------

double jain_index(std::span<const double> values) {
  if (values.empty())
    throw std::domain_error("jain_index: no values");
  double sum = 0.0, sq = 0.0;
  for (double x : values) {
    if (!(x >= 0.0))
      throw std::domain_error("jain_index: values must be non-negative");
    sum += x;
    sq += x * x;
  }
  if (sq == 0.0)
    throw std::domain_error("jain_index: all values are zero");
  return sum * sum / (static_cast<double>(values.size()) * sq);
}

double student_t_975(std::size_t dof) {
  static constexpr double kTable[30] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                        2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                        2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                        2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof == 0)
    throw std::domain_error("student_t_975: zero degrees of freedom");
  if (dof <= 30)
    return kTable[dof - 1];
  if (dof <= 60)
    return 2.000 + (2.042 - 2.000) * (60.0 - static_cast<double>(dof)) / 30.0;
  if (dof <= 120)
    return 1.980 + (2.000 - 1.980) * (120.0 - static_cast<double>(dof)) / 60.0;
  return 1.960;
}

Interval batch_means_ci(std::span<const double> batch_values) {
  if (batch_values.size() < 2)
    throw std::domain_error("batch_means_ci: need at least two batches");
  const double n = static_cast<double>(batch_values.size());
  const double mean = std::accumulate(batch_values.begin(), batch_values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : batch_values)
    ss += (v - mean) * (v - mean);
  const double half = student_t_975(batch_values.size() - 1) * std::sqrt(ss / (n - 1.0) / n);
  return {mean, mean - half, mean + half};
}

Interval jain_jackknife(const Eigen::MatrixXd& batch_group_bits, std::span<const int> group_sizes) {
  const Eigen::Index n = batch_group_bits.cols();
  if (n < 2)
    throw std::domain_error("jain_jackknife: need at least two batches");
  auto per_user = [&](const Eigen::VectorXd& bits) {
    std::vector<double> users;
    for (std::size_t c = 0; c < group_sizes.size(); ++c)
      for (int u = 0; u < group_sizes[c]; ++u)
        users.push_back(bits(static_cast<Eigen::Index>(c)) / group_sizes[c]);
    return jain_index(users);
  };
  const Eigen::VectorXd total = batch_group_bits.rowwise().sum();
  const double full = per_user(total);
  std::vector<double> loo(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    loo[static_cast<std::size_t>(i)] = per_user(total - batch_group_bits.col(i));
  const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : loo)
    ss += (v - mean) * (v - mean);
  const double half = student_t_975(static_cast<std::size_t>(n - 1)) *
                      std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
  return {full, full - half, full + half};
}

std::vector<double> MetricsReport::user_throughput() const {
  std::vector<double> users;
  for (std::size_t c = 0; c < group_sizes.size(); ++c)
    for (int u = 0; u < group_sizes[c]; ++u)
      users.push_back(group_throughput(static_cast<Eigen::Index>(c)) / group_sizes[c]);
  return users;
}

void MetricsReport::save_timeseries_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write time series '" + path + "'");
  out.precision(12);
  out << "time_s,group_id,throughput_bps\n";
  for (Eigen::Index t = 0; t < series.cols(); ++t)
    for (Eigen::Index c = 0; c < series.rows(); ++c)
      out << (static_cast<double>(t) + 1.0) * series_step_s << ',' << c << ',' << series(c, t) << '\n';
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd uniform_asymptotic_gain(const Network& network, std::span<const int> group_sizes,
                                        std::span<const AbsState> states,
                                        const SimConfig& config) {
  auto dist = std::make_shared<const SpatialDistribution>(
      SpatialDistribution::uniform(network.deployment.world, config.raster_resolution_m));
  std::vector<AsymptoticGroup> groups;
  for (int u : group_sizes)
    groups.push_back({dist, u});
  ShareOptions share;
  share.mc_trials = config.share_mc_trials;
  share.seed = config.seed;
  share.method = config.share_method;
  share.per_state_coverage = config.share_per_state;
  AsymptoticModel model(network, std::move(groups), share);
  return model.throughput_matrix(states);
}

namespace {

std::vector<double> expand_users(const Eigen::VectorXd& group_bits, std::span<const int> sizes) {
  std::vector<double> users;
  for (std::size_t c = 0; c < sizes.size(); ++c)
    for (int u = 0; u < sizes[c]; ++u)
      users.push_back(group_bits(static_cast<Eigen::Index>(c)) / sizes[c]);
  return users;
}

}  // namespace

MetricsReport run_experiment(const ExperimentSetup& setup, const Policy& policy) {
  if (!setup.network)
    throw std::domain_error("run_experiment: no network");
  const Network& net = *setup.network;
  const SimConfig& cfg = setup.config;
  cfg.validate();
  const std::size_t n_b = net.n_stations();
  const std::size_t n_c = setup.initial.size();
  const auto groups = static_cast<Eigen::Index>(n_c);
  const std::size_t total = cfg.subframes();
  const std::size_t per_interval = cfg.subframes_per_interval();
  const std::size_t mobility_every =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.mobility_step_s / cfg.subframe_s)));
  const std::size_t series_every =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.series_step_s / cfg.subframe_s)));
  const std::size_t jfi_every =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.jfi_window_s / cfg.subframe_s)));
  const std::size_t batch_len = total / cfg.batches;
  if (batch_len == 0)
    throw std::domain_error("run_experiment: run too short for the requested batches");

  std::vector<AbsState> states = setup.states;
  const bool needs_states = policy.kind == PolicyKind::asymptotic_pf ||
                            policy.kind == PolicyKind::dynamic_pf ||
                            policy.kind == PolicyKind::max_throughput;
  if (states.empty() && needs_states)
    states = enumerate_states(n_b);

  Simulator sim(net, setup.initial, cfg);
  std::vector<int> sizes;
  for (const auto& g : setup.initial.groups)
    sizes.push_back(g.size());
  Eigen::VectorXd user_weights(groups);
  for (Eigen::Index c = 0; c < groups; ++c)
    user_weights(c) = sizes[static_cast<std::size_t>(c)];

  std::vector<double> alpha = cfg.alpha.empty() ? std::vector<double>(cfg.history_window + 1, 1.0)
                                                 : cfg.alpha;
  History history(cfg.history_window, alpha);

  MetricsReport report;
  report.policy = policy.name();
  report.seed = cfg.seed;
  report.duration_s = static_cast<double>(total) * cfg.subframe_s;
  report.series_step_s = static_cast<double>(series_every) * cfg.subframe_s;
  report.group_sizes = sizes;
  report.series.setZero(groups, static_cast<Eigen::Index>(total / series_every));
  report.scheduled_subframes.setZero(groups);

  const AbsState all_active = AbsState::all_active(n_b);
  AbsPattern pattern;
  pattern.n_stations = n_b;
  pattern.subframes = {all_active};
  StateProbabilities fixed_probs;

  if (policy.kind == PolicyKind::fixed_ratio) {
    pattern = fixed_ratio_pattern(policy.used, policy.total, n_b, cfg.pattern_length, cfg.seed);
  } else if (policy.kind == PolicyKind::asymptotic_pf) {
    Eigen::MatrixXd gain = setup.asymptotic_gain
                               ? *setup.asymptotic_gain
                               : uniform_asymptotic_gain(net, sizes, states, cfg);
    auto tm = ThroughputMatrix::from(std::move(gain), user_weights, states);
    auto sol = solve_asymptotic_pf(tm);
    if (!sol.converged)
      ++report.solver_unconverged;
    fixed_probs = sol.probabilities;
  }

  Eigen::VectorXd total_bits = Eigen::VectorXd::Zero(groups);
  Eigen::VectorXd interval_bits = Eigen::VectorXd::Zero(groups);
  Eigen::VectorXd window_bits = Eigen::VectorXd::Zero(groups);
  Eigen::VectorXd series_bits = Eigen::VectorXd::Zero(groups);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(groups);
  std::vector<double> batch_bits(cfg.batches, 0.0);
  Eigen::MatrixXd batch_group_bits = Eigen::MatrixXd::Zero(groups, static_cast<Eigen::Index>(cfg.batches));
  std::size_t interval_index = 0;
  std::size_t in_interval = 0;

  for (std::size_t t = 0; t < total; ++t) {
    if (t > 0 && cfg.mobile && t % mobility_every == 0)
      sim.step_mobility(static_cast<double>(mobility_every) * cfg.subframe_s);

    if (t % per_interval == 0) {
      in_interval = 0;
      const std::uint64_t pattern_seed = mix64(cfg.seed ^ mix64(interval_index + 1));
      if (policy.kind == PolicyKind::dynamic_pf || policy.kind == PolicyKind::max_throughput) {
        SnapshotEvaluator eval(net, sim.snapshot(), cfg.efficiency_mode);
        Eigen::MatrixXd gain = eval.throughput_matrix(states);
        StateProbabilities probs;
        if (policy.kind == PolicyKind::dynamic_pf) {
          auto sol = solve_dynamic_pf(ThroughputMatrix::from(gain, user_weights, states), history);
          if (!sol.converged)
            ++report.solver_unconverged;
          probs = sol.probabilities;
        } else {
          probs = solve_max_throughput(ThroughputMatrix::from(gain, {}, states));
        }
        expected = gain * probs.p;
        pattern = build_pattern(probs, n_b, per_interval, pattern_seed);
      } else if (policy.kind == PolicyKind::asymptotic_pf) {
        pattern = build_pattern(fixed_probs, n_b, per_interval, pattern_seed);
      }
    }

    AbsState state = all_active;
    if (policy.kind == PolicyKind::fixed_ratio)
      state = pattern.at(t);
    else if (policy.kind != PolicyKind::legacy)
      state = pattern.at(in_interval);

    const Eigen::VectorXd& bits = sim.step_subframe(state);
    report.busy_cell_subframes += sim.last_busy_cells();
    for (int c : sim.last_served())
      if (c >= 0) {
        ++report.served_subframes;
        report.scheduled_subframes(c) += 1.0;
      }
    total_bits += bits;
    interval_bits += bits;
    window_bits += bits;
    series_bits += bits;
    if (t / batch_len < cfg.batches) {
      batch_bits[t / batch_len] += bits.sum();
      batch_group_bits.col(static_cast<Eigen::Index>(t / batch_len)) += bits;
    }

    ++in_interval;
    if (in_interval == per_interval || t + 1 == total) {
      const double seconds = static_cast<double>(in_interval) * cfg.subframe_s;
      if (policy.kind == PolicyKind::dynamic_pf)
        history.push(cfg.closed_loop_history ? Eigen::VectorXd(interval_bits / seconds) : expected);
      interval_bits.setZero();
      ++interval_index;
    }
    if ((t + 1) % series_every == 0) {
      report.series.col(static_cast<Eigen::Index>((t + 1) / series_every - 1)) =
          series_bits / report.series_step_s;
      series_bits.setZero();
    }
    if ((t + 1) % jfi_every == 0) {
      if (window_bits.sum() > 0.0)
        report.jfi_windows.push_back(jain_index(expand_users(window_bits, sizes)));
      window_bits.setZero();
    }
  }

  report.group_throughput = total_bits / report.duration_s;
  const double batch_seconds = static_cast<double>(batch_len) * cfg.subframe_s;
  for (auto& b : batch_bits)
    b /= batch_seconds;
  report.system_throughput = batch_means_ci(batch_bits);
  report.system_throughput.mean = total_bits.sum() / report.duration_s;
  if (report.jfi_windows.size() >= 2) {
    report.jfi_windowed = batch_means_ci(report.jfi_windows);
  } else if (!report.jfi_windows.empty()) {
    const double w = report.jfi_windows.front();
    report.jfi_windowed = {w, w, w};
  }
  if (total_bits.sum() > 0.0)
    report.jfi = jain_jackknife(batch_group_bits, sizes);
  if (report.solver_unconverged > 0)
    spdlog::debug("{} seed {}: {} solves hit the iteration cap", report.policy, cfg.seed,
                  report.solver_unconverged);
  return report;
}

StaticStateResult simulate_static_state(const Network& network, const Snapshot& snapshot,
                                        AbsState state, const SimConfig& config) {
  SimConfig cfg = config;
  cfg.mobile = false;
  cfg.validate();
  Simulator sim(network, snapshot, cfg);
  const std::size_t total = cfg.subframes();
  const std::size_t batch_len = total / cfg.batches;
  if (batch_len == 0)
    throw std::domain_error("simulate_static_state: run too short for the requested batches");
  std::vector<double> batch_bits(cfg.batches, 0.0);
  Eigen::VectorXd bits_total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(snapshot.size()));
  const std::size_t used = batch_len * cfg.batches;
  for (std::size_t t = 0; t < used; ++t) {
    const Eigen::VectorXd& bits = sim.step_subframe(state);
    bits_total += bits;
    batch_bits[t / batch_len] += bits.sum();
  }
  const double batch_seconds = static_cast<double>(batch_len) * cfg.subframe_s;
  for (auto& b : batch_bits)
    b /= batch_seconds;
  StaticStateResult out;
  out.system_throughput = batch_means_ci(batch_bits);
  out.group_throughput = bits_total / (static_cast<double>(used) * cfg.subframe_s);
  return out;
}

}  // namespace absf
