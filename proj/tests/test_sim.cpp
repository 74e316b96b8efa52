#include <doctest.h>

#include <cmath>
#include <random>

#include "absf/sim.hpp"

using namespace absf;

namespace {

Network small_network() {
  Network net;
  net.deployment = generate_grid_deployment(3, 40.0, 23.9794, World{100.0, 100.0});
  return net;
}

Snapshot groups_at(const World& world, std::vector<Point> centroids, std::vector<int> sizes,
                   std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Snapshot snap;
  snap.world = world;
  for (std::size_t i = 0; i < centroids.size(); ++i)
    snap.groups.push_back(Group{centroids[i], random_member_offsets(sizes[i], 5.0, rng)});
  return snap;
}

SimConfig short_config(double duration = 4.0) {
  SimConfig cfg;
  cfg.duration_s = duration;
  cfg.jfi_window_s = 1.0;
  cfg.batches = 4;
  cfg.raster_resolution_m = 5.0;
  cfg.share_mc_trials = 2000;
  return cfg;
}

}  // namespace

TEST_CASE("jain index") {
  const std::vector<double> equal{2.0, 2.0, 2.0};
  CHECK(jain_index(equal) == doctest::Approx(1.0));
  const std::vector<double> one{0.0, 0.0, 5.0, 0.0};
  CHECK(jain_index(one) == doctest::Approx(0.25));
  const std::vector<double> mixed{1.0, 2.0, 3.0};
  CHECK(jain_index(mixed) == doctest::Approx(36.0 / 42.0));
  CHECK_THROWS_AS(jain_index(std::vector<double>{}), std::domain_error);
  CHECK_THROWS_AS(jain_index(std::vector<double>{0.0, 0.0}), std::domain_error);
  CHECK_THROWS_AS(jain_index(std::vector<double>{1.0, -1.0}), std::domain_error);
}

TEST_CASE("batch means and t quantiles") {
  CHECK(student_t_975(1) == doctest::Approx(12.706).epsilon(1e-3));
  CHECK(student_t_975(19) == doctest::Approx(2.093).epsilon(1e-3));
  CHECK(student_t_975(1000) == doctest::Approx(1.96).epsilon(1e-3));
  const std::vector<double> b{1.0, 2.0, 3.0, 4.0};
  const auto ci = batch_means_ci(b);
  CHECK(ci.mean == doctest::Approx(2.5));
  const double half = student_t_975(3) * std::sqrt(5.0 / 3.0 / 4.0);
  CHECK(ci.high - ci.mean == doctest::Approx(half));
  CHECK(ci.mean - ci.low == doctest::Approx(half));
}

TEST_CASE("jackknife jfi") {
  Eigen::MatrixXd bits(2, 4);
  bits << 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0;
  const std::vector<int> sizes{1, 2};  // per-user 1 and 1: perfectly fair
  const auto j = jain_jackknife(bits, sizes);
  CHECK(j.mean == doctest::Approx(1.0));
  CHECK(j.high - j.low == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("policy names") {
  for (const std::string name : {"legacy", "fixed-4/8", "fixed-6/8", "asymptotic-pf", "dynamic-pf", "max-throughput"})
    CHECK(Policy::parse(name).name() == name);
  const auto f = Policy::parse("fixed-5/8");
  CHECK(f.kind == PolicyKind::fixed_ratio);
  CHECK(f.used == 5);
  CHECK(f.total == 8);
  CHECK_THROWS(Policy::parse("fixed-9/8"));
  CHECK_THROWS(Policy::parse("fixed-0/8"));
  CHECK_THROWS(Policy::parse("pf"));
}

TEST_CASE("config validation") {
  SimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.subframes() == 500000);
  CHECK(cfg.subframes_per_interval() == 500);
  cfg.interval_s = 0.0005;
  CHECK_THROWS_AS(cfg.validate(), std::domain_error);
  cfg = SimConfig{};
  cfg.alpha = {1.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), std::domain_error);
}

TEST_CASE("weighted round robin serves in proportion within one round") {
  WrrScheduler wrr(1, 3);
  const std::vector<int> cand{0, 1, 2};
  const std::vector<int> w{1, 3, 2};
  std::vector<int> served(3, 0);
  for (int t = 1; t <= 600; ++t) {
    served[static_cast<std::size_t>(wrr.pick(0, cand, w))]++;
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(served[static_cast<std::size_t>(c)] - t * w[static_cast<std::size_t>(c)] / 6.0) <= 1.0);
  }
  CHECK(wrr.pick(0, std::vector<int>{}, w) == -1);
}

TEST_CASE("random waypoint") {
  const World world{150.0, 150.0};
  RandomWaypoint rwp(world, 1.0, 10.0, 0.0, 3);
  Snapshot snap;
  snap.world = world;
  for (int i = 0; i < 200; ++i)
    snap.groups.push_back(Group{world.center(), {Point::Zero()}});
  auto state = rwp.init(snap);
  double centre_hits = 0.0, samples = 0.0;
  for (int t = 0; t < 20000; ++t) {
    const Snapshot before = snap;
    rwp.step(snap, state, 0.01);
    for (std::size_t g = 0; g < snap.size(); ++g) {
      const Point p = snap.groups[g].centroid;
      CHECK_FALSE(!world.contains(p));
      CHECK((p - before.groups[g].centroid).norm() <= 10.0 * 0.01 + 1e-9);
      if (t >= 5000) {
        // stationary RWP density is centre-weighted
        centre_hits += std::abs(p.x() - 75.0) <= 37.5 && std::abs(p.y() - 75.0) <= 37.5;
        samples += 1.0;
      }
    }
  }
  CHECK(centre_hits / samples > 0.3);  // uniform would give 0.25
}

TEST_CASE("all-blanked subframes deliver nothing") {
  const auto net = small_network();
  auto snap = groups_at(net.deployment.world, {{30, 30}, {60, 60}}, {2, 3});
  SimConfig cfg = short_config();
  cfg.mobile = false;
  Simulator sim(net, snap, cfg);
  for (int t = 0; t < 100; ++t) {
    CHECK(sim.step_subframe(AbsState::from_id(0)).isZero());
    CHECK(sim.last_busy_cells() == 0);
  }
}

TEST_CASE("each busy cell serves exactly one associated group per subframe") {
  const auto net = small_network();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<Point> c;
  std::vector<int> sizes;
  for (int i = 0; i < 10; ++i) {
    c.emplace_back(u(rng), u(rng));
    sizes.push_back(1 + i % 4);
  }
  const auto snap = groups_at(net.deployment.world, c, sizes);
  SimConfig cfg = short_config();
  cfg.mobile = false;
  Simulator sim(net, snap, cfg);
  for (const auto state : enumerate_states(3)) {
    const auto load = associate(snap, state, net.deployment, net.pathloss);
    for (int t = 0; t < 50; ++t) {
      sim.step_subframe(state);
      std::size_t busy = 0;
      for (std::size_t b = 0; b < 3; ++b) {
        const int g = sim.last_served()[b];
        if (load.groups_of[b].empty()) {
          CHECK(g == -1);
          continue;
        }
        ++busy;
        REQUIRE(g >= 0);
        CHECK(load.serving[static_cast<std::size_t>(g)] == static_cast<int>(b));
      }
      CHECK(sim.last_busy_cells() == busy);
    }
  }
}

TEST_CASE("static state: simulated throughput matches the snapshot model") {
  auto net = small_network();
  const auto snap = groups_at(net.deployment.world, {{20, 30}, {55, 50}, {80, 70}, {40, 80}}, {1, 3, 2, 4}, 4);
  SimConfig cfg = short_config(60.0);
  cfg.mobile = false;
  cfg.batches = 20;
  net.noise_model = NoiseModel::constant;  // what the simulator draws
  for (const auto state : {AbsState::all_active(3), AbsState::from_id(0b101)}) {
    const auto sim = simulate_static_state(net, snap, state, cfg);
    const auto model = instantaneous_throughput(snap, state, net, EfficiencyMode::exact);
    const double half = sim.system_throughput.high - sim.system_throughput.mean;
    CHECK(std::abs(sim.system_throughput.mean - model.total) <= 2.0 * half);
  }
}

TEST_CASE("experiments are deterministic and conserve airtime") {
  const auto net = small_network();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<Point> c;
  std::vector<int> sizes;
  for (int i = 0; i < 6; ++i) {
    c.emplace_back(u(rng), u(rng));
    sizes.push_back(1 + i % 3);
  }
  ExperimentSetup setup;
  setup.network = &net;
  setup.initial = groups_at(net.deployment.world, c, sizes);
  setup.config = short_config();
  for (const std::string name : {"legacy", "fixed-4/8", "asymptotic-pf", "dynamic-pf", "max-throughput"}) {
    const auto a = run_experiment(setup, Policy::parse(name));
    const auto b = run_experiment(setup, Policy::parse(name));
    CHECK(a.system_throughput.mean == b.system_throughput.mean);
    CHECK(a.jfi.mean == b.jfi.mean);
    CHECK(a.system_throughput.mean > 0.0);
    CHECK(a.jfi.mean <= 1.0 + 1e-12);
    CHECK(a.jfi.mean >= 1.0 / 12.0);
    // every subframe of a busy cell schedules exactly one group
    CHECK(a.scheduled_subframes.sum() == doctest::Approx(static_cast<double>(a.busy_cell_subframes)));
    CHECK(a.group_throughput.sum() == doctest::Approx(a.system_throughput.mean).epsilon(1e-9));
  }
  const auto legacy = run_experiment(setup, Policy::parse("legacy"));
  const auto half = run_experiment(setup, Policy::parse("fixed-4/8"));
  CHECK(half.busy_cell_subframes < legacy.busy_cell_subframes);
}

TEST_CASE("fading is shared across policies") {
  // Legacy and fixed-8/8 run the same all-active pattern and must agree exactly.
  const auto net = small_network();
  ExperimentSetup setup;
  setup.network = &net;
  setup.initial = groups_at(net.deployment.world, {{20, 20}, {70, 40}, {50, 80}}, {2, 1, 3});
  setup.config = short_config(2.0);
  const auto a = run_experiment(setup, Policy::parse("legacy"));
  const auto b = run_experiment(setup, Policy::parse("fixed-8/8"));
  CHECK((a.group_throughput - b.group_throughput).norm() == 0.0);
}
