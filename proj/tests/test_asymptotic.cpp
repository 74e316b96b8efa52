#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "absf/asymptotic.hpp"
#include "absf/errors.hpp"
#include "oracles.hpp"

using namespace absf;

namespace {

Network grid_network(int n = 7) {
  Network net;
  net.deployment = generate_grid_deployment(n);
  return net;
}

std::vector<int> repeat(std::size_t n, int u) { return std::vector<int>(n, u); }

}  // namespace

TEST_CASE("spatial distributions") {
  const World w{100.0, 60.0};
  const auto u = SpatialDistribution::uniform(w, 10.0);
  CHECK(u.size() == 60);
  CHECK(u.mass().sum() == doctest::Approx(1.0));
  CHECK(u.points().front().isApprox(Point(5.0, 5.0)));
  const auto p = SpatialDistribution::point(w, {30.0, 20.0});
  CHECK(p.size() == 1);
  CHECK(p.resolution() == 0.0);
  CHECK_THROWS_AS(SpatialDistribution::point(w, {130.0, 20.0}), std::domain_error);
  Eigen::ArrayXXd bad = Eigen::ArrayXXd::Ones(6, 10);
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(SpatialDistribution::raster(w, 10.0, bad), std::domain_error);
  const auto parsed = SpatialDistribution::parse("point(30,20)", w, 5.0);
  CHECK(parsed.points().front().isApprox(Point(30.0, 20.0)));

  const auto dir = std::filesystem::path(ABSF_TEST_TMP) / "asymptotic";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "raster.csv");
    f << "resolution_m,50\n1,0\n0,3\n";
  }
  const auto r = SpatialDistribution::load_csv((dir / "raster.csv").string(), World{100.0, 100.0});
  REQUIRE(r.size() == 2);  // empty cells dropped
  double at_hot = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r.points()[i].isApprox(Point(75.0, 75.0)))
      at_hot = r.mass()(static_cast<Eigen::Index>(i));
  CHECK(at_hot == doctest::Approx(0.75));
}

TEST_CASE("point mass reduces to the snapshot efficiency") {
  const auto net = grid_network();
  const Point x{61.0, 88.0};
  const auto dist = SpatialDistribution::point(net.deployment.world, x);
  Snapshot snap;
  snap.world = net.deployment.world;
  snap.groups = {Group{x, std::vector<Point>(3, Point::Zero())}};
  for (const auto state : enumerate_states(7)) {
    const double a = expected_state_efficiency(dist, 3, state, net);
    const double b = state_efficiency(0, snap, state, net, EfficiencyMode::centroid);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
  CHECK(expected_state_efficiency(dist, 3, AbsState::from_id(0), net) == 0.0);
}

TEST_CASE("asymptotic efficiency is linear in P") {
  const auto net = grid_network();
  const auto dist = SpatialDistribution::uniform(net.deployment.world, 5.0);
  const auto states = enumerate_states(7);
  Eigen::VectorXd e(static_cast<Eigen::Index>(states.size()));
  for (std::size_t s = 0; s < states.size(); ++s)
    e(static_cast<Eigen::Index>(s)) = expected_state_efficiency(dist, 2, states[s], net);
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> ex(1.0);
  Eigen::VectorXd p1(e.size()), p2(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    p1(i) = ex(rng);
    p2(i) = ex(rng);
  }
  p1 /= p1.sum();
  p2 /= p2.sum();
  const double lam = 0.3;
  const double mix = asymptotic_efficiency(e, lam * p1 + (1 - lam) * p2);
  CHECK(std::abs(mix - (lam * asymptotic_efficiency(e, p1) + (1 - lam) * asymptotic_efficiency(e, p2))) <= 1e-12 * mix);
  CHECK_THROWS_AS(asymptotic_efficiency(e, 2.0 * p1), std::domain_error);
  Eigen::VectorXd neg = p1;
  neg(0) = -0.1;
  neg(1) += 0.1;
  CHECK_THROWS_AS(asymptotic_efficiency(e, neg), std::domain_error);
}

TEST_CASE("raster refinement") {
  const auto net = grid_network();
  for (const auto state : {AbsState::all_active(7), AbsState::from_id(0b0010110)})
    CHECK(raster_relative_change(net, 3, state, 2.0) < 0.01);
}

TEST_CASE("expected share: trivial populations") {
  const double k = 16.8e6;
  Eigen::VectorXd cov(1);
  cov << 0.7;
  CHECK(expected_share(0, cov, repeat(1, 3), k).value == doctest::Approx(k));
  Eigen::VectorXd two(2);
  two << 0.5, 0.5;
  CHECK(expected_share(0, two, repeat(2, 1), k).value == doctest::Approx(0.75 * k));
  CHECK(oracle::share_mc(0, {0.5, 0.5}, {1, 1}, k, 400000, 3).mean == doctest::Approx(0.75 * k).epsilon(0.005));
  two << 0.5, 0.0;
  CHECK(expected_share(0, two, repeat(2, 1), k).value == doctest::Approx(k));
  two << 0.5, 1.5;
  CHECK_THROWS_AS(expected_share(0, two, repeat(2, 1), k), std::domain_error);
}

TEST_CASE("expected share: methods agree with the homogeneous form") {
  const double k = 1.0;
  for (std::size_t n : {2u, 5u, 10u})
    for (double p : {0.1, 0.5, 0.9}) {
      const Eigen::VectorXd cov = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), p);
      const auto sizes = repeat(n, 2);
      const double closed = expected_share_homogeneous(n, p, k);
      ShareOptions opt;
      opt.method = ShareMethod::exact;
      CHECK(std::abs(expected_share(0, cov, sizes, k, opt).value - closed) <= 1e-12 * closed);
      opt.method = ShareMethod::convolution;
      CHECK(std::abs(expected_share(0, cov, sizes, k, opt).value - closed) <= 1e-12 * closed);
      opt.method = ShareMethod::monte_carlo;
      opt.mc_trials = 100000;
      const auto mc = expected_share(0, cov, sizes, k, opt);
      CHECK(mc.std_error > 0.0);
      CHECK(std::abs(mc.value - closed) <= 4.0 * mc.std_error + 1e-15);
    }
}

TEST_CASE("expected share: heterogeneous sizes against sampling") {
  const std::vector<double> p{0.0, 0.2, 0.7, 0.4, 0.9, 0.05};
  const std::vector<int> u{3, 1, 5, 2, 4, 1};
  Eigen::VectorXd cov = Eigen::Map<const Eigen::VectorXd>(p.data(), 6);
  ShareOptions exact;
  exact.method = ShareMethod::exact;
  ShareOptions conv;
  conv.method = ShareMethod::convolution;
  for (std::size_t c = 0; c < u.size(); ++c) {
    const double e = expected_share(c, cov, u, 1.0, exact).value;
    CHECK(expected_share(c, cov, u, 1.0, conv).value == doctest::Approx(e).epsilon(1e-12));
    const auto mc = oracle::share_mc(c, p, u, 1.0, 200000, 10 + c);
    CHECK(std::abs(e - mc.mean) <= 4.0 * mc.std_error);
  }
}

TEST_CASE("expected share decreases as others cover more") {
  const auto sizes = repeat(6, 2);
  double prev = 2.0;
  for (double p = 0.0; p <= 1.0; p += 0.1) {
    const Eigen::VectorXd cov = Eigen::VectorXd::Constant(6, p);
    const double v = expected_share(0, cov, sizes, 1.0).value;
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
  CHECK(prev == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("exact share beyond the limit is a resource error") {
  const Eigen::VectorXd cov = Eigen::VectorXd::Constant(30, 0.3);
  ShareOptions opt;
  opt.method = ShareMethod::exact;
  CHECK_THROWS_AS(expected_share(0, cov, repeat(30, 1), 1.0, opt), ResourceError);
  opt.method = ShareMethod::automatic;
  CHECK(expected_share(0, cov, repeat(30, 1), 1.0, opt).std_error > 0.0);  // falls back to sampling
  opt.method = ShareMethod::convolution;
  CHECK(expected_share(0, cov, repeat(30, 1), 1.0, opt).value ==
        doctest::Approx(expected_share_homogeneous(30, 0.3, 1.0)).epsilon(1e-12));
}

TEST_CASE("model coverage is a distribution over stations") {
  const auto net = grid_network();
  auto dist = std::make_shared<const SpatialDistribution>(SpatialDistribution::uniform(net.deployment.world, 5.0));
  std::vector<AsymptoticGroup> groups;
  for (int i = 0; i < 6; ++i)
    groups.push_back({dist, 1 + i % 3});
  const AsymptoticModel model(net, groups);
  for (Eigen::Index c = 0; c < 6; ++c)
    CHECK(model.coverage().row(c).sum() == doctest::Approx(1.0));
  const auto states = enumerate_states(7);
  const Eigen::MatrixXd m = model.throughput_matrix(states);
  CHECK(m.col(0).isZero());
  CHECK((m.array() >= 0.0).all());
}

TEST_CASE("model throughput matches resampled snapshots") {
  // Centroids drawn from the raster support, instantaneous throughput averaged
  // over placements. With per-state coverage the model is exact for any state.
  Network net;
  net.deployment = generate_grid_deployment(3, 50.0, 23.9794, World{120.0, 120.0});
  auto dist = std::make_shared<const SpatialDistribution>(SpatialDistribution::uniform(net.deployment.world, 8.0));
  const std::vector<int> sizes{1, 2, 3, 2, 1};
  std::vector<AsymptoticGroup> groups;
  for (int u : sizes)
    groups.push_back({dist, u});
  ShareOptions opt;
  opt.method = ShareMethod::exact;
  opt.per_state_coverage = true;
  const AsymptoticModel per_state(net, groups, opt);
  opt.per_state_coverage = false;
  const AsymptoticModel literal(net, groups, opt);

  std::mt19937_64 rng(21);
  std::discrete_distribution<std::size_t> pick(dist->mass().data(), dist->mass().data() + dist->mass().size());
  const std::vector<AbsState> states{AbsState::all_active(3), AbsState::from_id(0b101), AbsState::from_id(0b010)};
  const int trials = 20000;
  for (const auto state : states) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(5), sq = Eigen::VectorXd::Zero(5);
    for (int t = 0; t < trials; ++t) {
      Snapshot snap;
      snap.world = net.deployment.world;
      for (int u : sizes)
        snap.groups.push_back(Group{dist->points()[pick(rng)], std::vector<Point>(static_cast<std::size_t>(u), Point::Zero())});
      const auto thr = instantaneous_throughput(snap, state, net, EfficiencyMode::centroid);
      sum += thr.per_group;
      sq += thr.per_group.cwiseProduct(thr.per_group);
    }
    for (Eigen::Index c = 0; c < 5; ++c) {
      const double mean = sum(c) / trials;
      const double se = std::sqrt((sq(c) / trials - mean * mean) / trials);
      const double model = per_state.expected_state_throughput(static_cast<std::size_t>(c), state);
      CHECK(std::abs(model - mean) <= 4.0 * se);
      if (state == AbsState::all_active(3))
        CHECK(literal.expected_state_throughput(static_cast<std::size_t>(c), state) == doctest::Approx(model).epsilon(1e-12));
    }
  }
}

TEST_CASE("cached shares do not depend on evaluation order") {
  const auto net = grid_network();
  auto dist = std::make_shared<const SpatialDistribution>(SpatialDistribution::uniform(net.deployment.world, 10.0));
  std::vector<AsymptoticGroup> groups;
  for (int i = 0; i < 30; ++i)
    groups.push_back({dist, 1 + i % 5});
  ShareOptions opt;
  opt.method = ShareMethod::monte_carlo;
  opt.mc_trials = 20000;
  const AsymptoticModel a(net, groups, opt);
  const AsymptoticModel b(net, groups, opt);
  CHECK((a.expected_shares() - b.expected_shares()).norm() == 0.0);
  // groups of equal size share the same distribution, hence the same row
  CHECK((a.expected_shares().row(0) - a.expected_shares().row(5)).norm() == 0.0);
}
