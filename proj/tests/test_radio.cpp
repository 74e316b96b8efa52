#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "absf/deployment.hpp"
#include "absf/radio.hpp"
#include "oracles.hpp"

using namespace absf;

namespace {

LinkBudget<double> budget(double signal_rate, std::vector<double> interferers, double noise) {
  LinkBudget<double> b;
  b.signal_rate = signal_rate;
  b.interferer_rates = Eigen::Map<Eigen::ArrayXd>(interferers.data(), static_cast<Eigen::Index>(interferers.size()));
  b.noise_var = noise;
  return b;
}

std::filesystem::path tmp_dir() {
  std::filesystem::path p = std::filesystem::path(ABSF_TEST_TMP) / "radio";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("sinr cdf edge values") {
  const auto b = budget(2.0, {1.0, 3.0}, 0.1);
  CHECK(sinr_cdf(0.0, b) == doctest::Approx(0.0));
  CHECK(sinr_cdf(1e12, b) == doctest::Approx(1.0));
  CHECK_THROWS_AS(sinr_cdf(-1.0, b), std::domain_error);
  CHECK_THROWS_AS(sinr_cdf(1.0, budget(1.0, {}, 0.0)), std::domain_error);
  CHECK_THROWS_AS(sinr_cdf(1.0, budget(0.0, {1.0}, 0.0)), std::domain_error);
}

TEST_CASE("noise-only cdf matches 1 - (1 + 2 lambda N x)^-1/2") {
  const auto b = budget(4.0, {}, 0.5);
  for (double x : {0.1, 1.0, 7.0})
    CHECK(sinr_cdf(x, b) == doctest::Approx(1.0 - 1.0 / std::sqrt(1.0 + 4.0 * x)));
}

TEST_CASE("sinr cdf agrees with sampling") {
  const auto b = budget(1.0, {2.0, 5.0}, 0.3);
  const std::vector<double> xs{0.05, 0.3, 1.0, 3.0, 10.0};
  const auto mc = oracle::sinr_cdf_mc(b, xs, 400000, 11);
  for (std::size_t i = 0; i < xs.size(); ++i)
    CHECK(std::abs(sinr_cdf(xs[i], b) - mc[i].mean) <= 4.0 * mc[i].std_error);
}

TEST_CASE("constant noise uses exp(-lambda N x)") {
  auto b = budget(2.0, {}, 0.25);
  b.noise_model = NoiseModel::constant;
  CHECK(sinr_cdf(3.0, b) == doctest::Approx(1.0 - std::exp(-1.5)));
}

TEST_CASE("vectorised cdf equals the scalar one") {
  const auto b = budget(1.5, {0.7, 2.0, 9.0}, 0.05);
  Eigen::ArrayXd xs(4);
  xs << 0.0, 0.2, 2.0, 50.0;
  const Eigen::ArrayXd v = sinr_cdf_at(xs, b);
  for (Eigen::Index i = 0; i < xs.size(); ++i)
    CHECK(v(i) == doctest::Approx(sinr_cdf(xs(i), b)).epsilon(1e-14));
}

TEST_CASE("group cdf: identical members reduce to the centroid power") {
  const auto b = budget(1.0, {3.0}, 0.2);
  const std::vector<LinkBudget<double>> members(4, b);
  for (double x : {0.1, 0.8, 4.0})
    CHECK(group_cdf_exact<double>(x, members) == doctest::Approx(group_cdf_centroid(x, b, 4)));
  CHECK(group_cdf_centroid(0.8, b, 1) == doctest::Approx(sinr_cdf(0.8, b)));
}

TEST_CASE("default MCS table") {
  const auto mcs = McsTable::cqi_default();
  REQUIRE(mcs.size() == 15);
  CHECK(linear_to_db(mcs.thresholds()(0)) == doctest::Approx(-6.7));
  CHECK(mcs.max_bits() == doctest::Approx(5.5547));
  CHECK(mcs.select(db_to_linear(-7.0)) == -1);
  CHECK(mcs.select(db_to_linear(-6.7) * (1 + 1e-12)) == 0);
  CHECK(mcs.select(db_to_linear(10.0)) == 7);
  CHECK(mcs.select(db_to_linear(40.0)) == 14);
}

TEST_CASE("MCS table csv round trip and shipped file") {
  const auto mcs = McsTable::cqi_default();
  const auto path = (tmp_dir() / "mcs.csv").string();
  mcs.save_csv(path);
  const auto back = McsTable::load_csv(path);
  REQUIRE(back.size() == mcs.size());
  for (std::size_t k = 0; k < mcs.size(); ++k) {
    CHECK(back.entries()[k].t_min == doctest::Approx(mcs.entries()[k].t_min).epsilon(1e-12));
    CHECK(back.entries()[k].bits_per_symbol == doctest::Approx(mcs.entries()[k].bits_per_symbol));
  }
  const auto shipped = McsTable::load_csv(std::string(ABSF_DATA_DIR) + "/mcs_cqi15.csv");
  CHECK((shipped.thresholds() - mcs.thresholds()).abs().maxCoeff() < 1e-12);
}

TEST_CASE("MCS table validation") {
  CHECK_THROWS_AS(McsTable(std::vector<McsEntry>{}), std::domain_error);
  CHECK_THROWS_AS(McsTable({{1.0, 2.0, 1.0}}), std::domain_error);  // last t_max not inf
  CHECK_THROWS_AS(McsTable({{1.0, 2.0, 1.0}, {3.0, INFINITY, 2.0}}), std::domain_error);  // gap
  CHECK_THROWS_AS(McsTable({{1.0, 2.0, 2.0}, {2.0, INFINITY, 1.0}}), std::domain_error);  // bits fall
}

TEST_CASE("efficiency extremes") {
  const auto mcs = McsTable::cqi_default();
  CHECK(transmission_efficiency([](double) { return 0.0; }, mcs) == doctest::Approx(mcs.max_bits()));
  CHECK(transmission_efficiency([](double) { return 1.0; }, mcs) == doctest::Approx(0.0));
}

TEST_CASE("efficiency agrees with sampled MCS selection") {
  const auto mcs = McsTable::cqi_default();
  const auto b = budget(1.0, {4.0, 6.0}, 0.01);
  const double zeta = transmission_efficiency([&](double x) { return sinr_cdf(x, b); }, mcs);
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> s(1.0), i1(4.0), i2(6.0);
  std::normal_distribution<double> g(0.0, 0.1);
  double sum = 0.0, sq = 0.0;
  const int n = 300000;
  for (int t = 0; t < n; ++t) {
    const double z = g(rng);
    const int k = mcs.select(s(rng) / (i1(rng) + i2(rng) + z * z));
    const double bits = k < 0 ? 0.0 : mcs.bits()(k);
    sum += bits;
    sq += bits * bits;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(zeta - mean) <= 4.0 * se);
}

TEST_CASE("pathloss") {
  PathlossModel pl;
  CHECK(pl.loss_db(1000.0) == doctest::Approx(128.1));
  CHECK(pl.loss_db(100.0) == doctest::Approx(128.1 - 37.6));
  CHECK(pl.loss_db(0.0) == doctest::Approx(pl.loss_db(1.0)));
  CHECK(pl.gain(50.0) == doctest::Approx(std::pow(10.0, -pl.loss_db(50.0) / 10.0)));
  pl.exponent = -1.0;
  CHECK_THROWS(pl.validate());
}

TEST_CASE("link budget at a point") {
  const auto dep = generate_grid_deployment(3, 50.0);
  PathlossModel pl;
  const Point here = dep.stations[0].position + Point(10.0, 0.0);
  const auto b = link_budget_at(here, dep.stations[0], dep.stations, pl, 1e-13);
  CHECK(b.signal_rate == doctest::Approx(1.0 / mean_rx_power(here, dep.stations[0], pl)));
  CHECK(b.interferer_rates.size() == 2);
  const std::vector<BaseStation> only{dep.stations[1]};
  CHECK_THROWS_AS(link_budget_at(here, dep.stations[0], only, pl, 1e-13), std::domain_error);
}

TEST_CASE("grid deployment") {
  const auto dep = generate_grid_deployment();
  REQUIRE(dep.size() == 7);
  CHECK(dep.min_pairwise_distance() == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(dep.stations[0].tx_power_w() == doctest::Approx(0.25).epsilon(1e-5));
  for (const auto& s : dep.stations)
    CHECK(dep.world.contains(s.position));
  const auto one = generate_grid_deployment(1);
  CHECK(one.stations[0].position.isApprox(World{}.center()));
  CHECK_THROWS_AS(generate_grid_deployment(19, 50.0), std::domain_error);  // second ring leaves 150 m
  CHECK_THROWS_AS(generate_grid_deployment(0), std::domain_error);
}

TEST_CASE("deployment csv") {
  const auto dep = generate_grid_deployment();
  const auto path = (tmp_dir() / "dep.csv").string();
  dep.save_csv(path);
  const auto back = Deployment::load_csv(path, dep.world);
  REQUIRE(back.size() == dep.size());
  CHECK(back.stations[3].position.isApprox(dep.stations[3].position, 1e-9));
  const auto standin = Deployment::load_csv(std::string(ABSF_DATA_DIR) + "/heterogeneous_standin.csv", World{400.0, 320.0});
  CHECK(standin.size() == 9);
  CHECK_THROWS(Deployment::load_csv(std::string(ABSF_DATA_DIR) + "/heterogeneous_standin.csv", World{100.0, 100.0}));
}
