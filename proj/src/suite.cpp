#include "absf/suite.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>
#include <spdlog/spdlog.h>

#include "absf/asymptotic.hpp"

namespace absf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write '" + path.string() + "'");
  out.precision(12);
  return out;
}

std::string file_tag(const std::string& policy) {
  std::string tag = policy;
  for (char& ch : tag)
    if (ch == '/')
      ch = '_';
  return tag;
}

std::vector<int> group_sizes(const Snapshot& snap) {
  std::vector<int> sizes;
  for (const auto& g : snap.groups)
    sizes.push_back(g.size());
  return sizes;
}

std::vector<AbsState> scenario_states(const Scenario& s, const Network& net, std::uint64_t seed) {
  return enumerate_states(net.n_stations(), s.max_states, seed);
}

Eigen::VectorXd size_weights(const std::vector<int>& sizes) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(sizes.size()));
  for (std::size_t i = 0; i < sizes.size(); ++i)
    w(static_cast<Eigen::Index>(i)) = sizes[i];
  return w;
}

}  // namespace

std::string config_hash(const Scenario& scenario) {
  const std::string text = json(scenario).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

bool SuiteResult::ok() const {
  for (const auto& r : runs)
    if (!r.ok)
      return false;
  return !runs.empty();
}

std::vector<PooledRow> pool_runs(const std::vector<RunRecord>& runs) {
  std::vector<PooledRow> rows;
  std::map<std::string, std::vector<const RunRecord*>> by_policy;
  std::vector<std::string> order;
  for (const auto& r : runs) {
    if (!r.ok)
      continue;
    if (!by_policy.count(r.policy))
      order.push_back(r.policy);
    by_policy[r.policy].push_back(&r);
  }
  for (const auto& name : order) {
    const auto& list = by_policy[name];
    PooledRow row;
    row.policy = name;
    row.runs = list.size();
    if (list.size() == 1) {
      row.system_throughput = list.front()->system_throughput;
      row.jfi = list.front()->jfi;
    } else {
      std::vector<double> thr, jfi;
      for (const auto* r : list) {
        thr.push_back(r->system_throughput.mean);
        jfi.push_back(r->jfi.mean);
      }
      row.system_throughput = batch_means_ci(thr);
      row.jfi = batch_means_ci(jfi);
    }
    rows.push_back(row);
  }
  return rows;
}

SuiteResult run_suite(const Scenario& scenario, const fs::path& out_dir) {
  scenario.validate();
  fs::create_directories(out_dir / "runs");
  const Network net = scenario.network();
  SuiteResult result;
  const bool needs_states = std::any_of(scenario.policies.begin(), scenario.policies.end(),
                                        [](const std::string& p) {
                                          const auto k = Policy::parse(p).kind;
                                          return k != PolicyKind::legacy && k != PolicyKind::fixed_ratio;
                                        });

  for (std::uint64_t seed : scenario.seeds) {
    ExperimentSetup setup;
    setup.network = &net;
    setup.config = scenario.sim;
    setup.config.seed = seed;
    setup.initial = scenario.snapshot(seed);
    if (needs_states)
      setup.states = scenario_states(scenario, net, seed);
    for (const auto& name : scenario.policies) {
      RunRecord rec;
      rec.policy = name;
      rec.seed = seed;
      try {
        const Policy policy = Policy::parse(name);
        if (policy.kind == PolicyKind::asymptotic_pf && !setup.asymptotic_gain) {
          spdlog::info("seed {}: computing asymptotic throughput matrix", seed);
          setup.asymptotic_gain = uniform_asymptotic_gain(net, group_sizes(setup.initial),
                                                          setup.states, setup.config);
        }
        spdlog::info("running {} seed {}", name, seed);
        const MetricsReport report = run_experiment(setup, policy);
        rec.timeseries = "runs/" + file_tag(name) + "_seed" + std::to_string(seed) + ".csv";
        report.save_timeseries_csv((out_dir / rec.timeseries).string());
        rec.system_throughput = report.system_throughput;
        rec.jfi = report.jfi;
        rec.jfi_windowed = report.jfi_windowed;
        rec.ok = true;
        spdlog::info("{} seed {}: {:.4g} bit/s, JFI {:.4f}", name, seed, rec.system_throughput.mean,
                     rec.jfi.mean);
      } catch (const std::exception& e) {
        rec.error = e.what();
        spdlog::error("{} seed {} failed: {}", name, seed, e.what());
      }
      result.runs.push_back(rec);
    }
  }
  result.pooled = pool_runs(result.runs);

  auto summary = open_out(out_dir / "summary.csv");
  summary << "policy,system_throughput,jfi,ci_low,ci_high\n";
  for (const auto& r : result.runs)
    if (r.ok)
      summary << r.policy << ',' << r.system_throughput.mean << ',' << r.jfi.mean << ','
              << r.system_throughput.low << ',' << r.system_throughput.high << '\n';

  auto pooled = open_out(out_dir / "summary_pooled.csv");
  pooled << "policy,runs,system_throughput,ci_low,ci_high,jfi,jfi_ci_low,jfi_ci_high\n";
  for (const auto& p : result.pooled)
    pooled << p.policy << ',' << p.runs << ',' << p.system_throughput.mean << ','
           << p.system_throughput.low << ',' << p.system_throughput.high << ',' << p.jfi.mean << ','
           << p.jfi.low << ',' << p.jfi.high << '\n';

  json runs = json::array();
  for (const auto& r : result.runs)
    runs.push_back({{"policy", r.policy},
                    {"seed", r.seed},
                    {"status", r.ok ? "ok" : "failed"},
                    {"error", r.error},
                    {"timeseries", r.timeseries},
                    {"jfi_windowed", {r.jfi_windowed.mean, r.jfi_windowed.low, r.jfi_windowed.high}}});
  json manifest{{"config_hash", config_hash(scenario)},
                {"config", scenario},
                {"base_dir", fs::absolute(scenario.base_dir).string()},
                {"versions",
                 {{"absf", "1.0.0"},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                "." + std::to_string(EIGEN_MINOR_VERSION)},
                  {"compiler", __VERSION__}}},
                {"runs", runs}};
  open_out(out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return result;
}

std::vector<GainRow> relay_gain(const Network& network, const Snapshot& snapshot,
                                const std::vector<int>& sizes) {
  std::vector<GainRow> rows;
  const AbsState all = AbsState::all_active(network.n_stations());
  for (int u : sizes) {
    Snapshot forced = snapshot;
    for (auto& g : forced.groups)
      g.member_offsets.assign(static_cast<std::size_t>(u), Point::Zero());
    const auto thr = instantaneous_throughput(forced, all, network, EfficiencyMode::centroid);
    rows.push_back({u, thr.per_group.mean()});
  }
  return rows;
}

AnalysisResult analyze(const Scenario& scenario, const fs::path& out_dir, std::uint64_t seed) {
  scenario.validate();
  const Network net = scenario.network();
  const Snapshot snap = scenario.snapshot(seed);
  const auto states = scenario_states(scenario, net, seed);
  AnalysisResult out;

  SnapshotEvaluator eval(net, snap, scenario.sim.efficiency_mode);
  const Eigen::MatrixXd inst = eval.throughput_matrix(states);
  SimConfig cfg = scenario.sim;
  cfg.seed = seed;
  const Eigen::MatrixXd asym = uniform_asymptotic_gain(net, group_sizes(snap), states, cfg);
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto col = static_cast<Eigen::Index>(s);
    out.states.push_back({states[s], inst.col(col).sum(), asym.col(col).sum()});
  }
  out.relay_gain = relay_gain(net, snap, {1, 2, 3, 4, 5});

  auto st = open_out(out_dir / "states.csv");
  st << "state_id,active_stations,instantaneous_bps,asymptotic_bps\n";
  for (const auto& r : out.states)
    st << r.state.id() << ',' << r.state.active_count() << ',' << r.instantaneous_bps << ','
       << r.asymptotic_bps << '\n';

  const auto all = eval.throughput(AbsState::all_active(net.n_stations()));
  auto gr = open_out(out_dir / "groups.csv");
  gr << "group_id,size,x_m,y_m,serving_station,efficiency,throughput_bps\n";
  for (std::size_t c = 0; c < snap.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    gr << c << ',' << snap.groups[c].size() << ',' << snap.groups[c].centroid.x() << ','
       << snap.groups[c].centroid.y() << ',' << all.load.serving[c] << ',' << all.efficiency(i)
       << ',' << all.per_group(i) << '\n';
  }

  auto rg = open_out(out_dir / "relay_gain.csv");
  rg << "group_size,mean_group_bps,gain_vs_single\n";
  for (const auto& r : out.relay_gain)
    rg << r.group_size << ',' << r.mean_group_bps << ','
       << r.mean_group_bps / out.relay_gain.front().mean_group_bps - 1.0 << '\n';
  return out;
}

PfSolution optimize(const Scenario& scenario, const fs::path& out_dir, std::uint64_t seed) {
  scenario.validate();
  const Network net = scenario.network();
  const Snapshot snap = scenario.snapshot(seed);
  const auto states = scenario_states(scenario, net, seed);
  SimConfig cfg = scenario.sim;
  cfg.seed = seed;
  const auto sizes = group_sizes(snap);
  const Eigen::MatrixXd gain = uniform_asymptotic_gain(net, sizes, states, cfg);
  PfSolution sol =
      solve_asymptotic_pf(ThroughputMatrix::from(gain, size_weights(sizes), states));

  fs::create_directories(out_dir);
  sol.probabilities.save_csv((out_dir / "probabilities.csv").string());
  build_pattern(sol.probabilities, net.n_stations(), scenario.sim.pattern_length, seed)
      .save_txt((out_dir / "pattern.txt").string());
  const Eigen::VectorXd thr = gain * sol.probabilities.p;
  json info{{"objective", sol.objective},
            {"kkt_residual", sol.kkt_residual},
            {"iterations", sol.iterations},
            {"converged", sol.converged},
            {"excluded_groups", sol.excluded_groups},
            {"system_throughput_bps", thr.sum()},
            {"config_hash", config_hash(scenario)},
            {"seed", seed}};
  open_out(out_dir / "optimize.json") << info.dump(2) << '\n';
  if (!sol.converged)
    spdlog::warn("asymptotic PF stopped after {} iterations (KKT residual {:.3g})", sol.iterations,
                 sol.kkt_residual);
  return sol;
}

std::vector<ValidationRow> validate_model(const Scenario& scenario, const fs::path& out_dir,
                                          std::uint64_t seed) {
  scenario.validate();
  const Network net = scenario.network();
  std::vector<AbsState> states;
  if (!scenario.validation.state_ids.empty()) {
    for (auto id : scenario.validation.state_ids)
      states.push_back(AbsState::from_id(id));
  } else {
    states = enumerate_states(net.n_stations(), scenario.validation.n_states, seed);
  }

  SimConfig cfg = scenario.sim;
  cfg.seed = seed;
  cfg.duration_s = scenario.validation.duration_s;
  std::vector<ValidationRow> rows;
  for (int u : scenario.validation.sizes) {
    Scenario sized = scenario;
    sized.groups.fixed_size = u;
    // Same centroids for every size; only the member count changes.
    const Snapshot snap = sized.snapshot(seed);
    SnapshotEvaluator eval(net, snap, EfficiencyMode::exact);
    Network flat = net;
    flat.noise_model = NoiseModel::constant;
    SnapshotEvaluator eval_flat(flat, snap, EfficiencyMode::exact);
    for (const AbsState s : states) {
      ValidationRow row;
      row.group_size = u;
      row.state = s;
      row.analytical_bps = eval.throughput(s).total;
      row.analytical_const_noise_bps = eval_flat.throughput(s).total;
      row.simulated_bps = simulate_static_state(net, snap, s, cfg).system_throughput;
      spdlog::info("U={} state {}: model {:.4g}, sim {:.4g} [{:.4g}, {:.4g}]", u, s.id(),
                   row.analytical_bps, row.simulated_bps.mean, row.simulated_bps.low,
                   row.simulated_bps.high);
      rows.push_back(row);
    }
  }

  auto out = open_out(out_dir / "validation.csv");
  out << "group_size,state_id,analytical_bps,analytical_const_noise_bps,sim_mean_bps,ci_low,ci_high,"
         "inside\n";
  for (const auto& r : rows)
    out << r.group_size << ',' << r.state.id() << ',' << r.analytical_bps << ','
        << r.analytical_const_noise_bps << ','
        << r.simulated_bps.mean << ',' << r.simulated_bps.low << ',' << r.simulated_bps.high << ','
        << (r.inside() ? 1 : 0) << '\n';
  return rows;
}

}  // namespace absf
