#include "absf/asymptotic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "absf/errors.hpp"

namespace absf {

SpatialDistribution SpatialDistribution::uniform(const World& world, double resolution_m) {
  if (!(resolution_m > 0.0))
    throw std::domain_error("raster resolution must be positive");
  const auto cols = static_cast<Eigen::Index>(std::ceil(world.width / resolution_m - 1e-9));
  const auto rows = static_cast<Eigen::Index>(std::ceil(world.height / resolution_m - 1e-9));
  // Partial edge cells carry mass proportional to their in-world area.
  Eigen::ArrayXXd mass(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double w = std::min(resolution_m, world.width - j * resolution_m);
      const double h = std::min(resolution_m, world.height - i * resolution_m);
      mass(i, j) = w * h;
    }
  return raster(world, resolution_m, mass);
}

SpatialDistribution SpatialDistribution::point(const World& world, const Point& p) {
  if (!world.contains(p))
    throw std::domain_error("point distribution outside the world rectangle");
  SpatialDistribution d;
  d.world_ = world;
  d.points_ = {p};
  d.mass_ = Eigen::VectorXd::Ones(1);
  return d;
}

SpatialDistribution SpatialDistribution::raster(const World& world, double resolution_m,
                                                const Eigen::ArrayXXd& mass) {
  if (!(resolution_m > 0.0))
    throw std::domain_error("raster resolution must be positive");
  if (mass.size() == 0 || (mass < 0.0).any() || !mass.allFinite())
    throw std::domain_error("raster mass must be finite and non-negative");
  const double total = mass.sum();
  if (!(total > 0.0))
    throw std::domain_error("raster mass sums to zero");
  SpatialDistribution d;
  d.world_ = world;
  d.resolution_ = resolution_m;
  std::vector<double> m;
  for (Eigen::Index i = 0; i < mass.rows(); ++i)
    for (Eigen::Index j = 0; j < mass.cols(); ++j) {
      if (mass(i, j) == 0.0)
        continue;
      const Point c = world.clamp({std::min((j + 0.5) * resolution_m, world.width),
                                   std::min((i + 0.5) * resolution_m, world.height)});
      d.points_.push_back(c);
      m.push_back(mass(i, j) / total);
    }
  d.mass_ = Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  d.mass_ /= d.mass_.sum();
  return d;
}

SpatialDistribution SpatialDistribution::load_csv(const std::string& path, const World& world) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open raster '" + path + "'");
  std::string line;
  std::getline(in, line);
  const auto comma = line.find(',');
  if (comma == std::string::npos || line.substr(0, comma) != "resolution_m")
    throw std::runtime_error("raster '" + path + "': first line must be resolution_m,<value>");
  const double res = std::stod(line.substr(comma + 1));
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("raster '" + path + "': ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw std::runtime_error("raster '" + path + "' has no data");
  Eigen::ArrayXXd mass(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      mass(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return raster(world, res, mass);
}

SpatialDistribution SpatialDistribution::parse(const std::string& spec, const World& world,
                                               double resolution_m) {
  if (spec == "uniform")
    return uniform(world, resolution_m);
  static const std::regex point_re(R"(\s*point\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)\s*)");
  std::smatch m;
  if (std::regex_match(spec, m, point_re))
    return point(world, {std::stod(m[1].str()), std::stod(m[2].str())});
  return load_csv(spec, world);
}

double asymptotic_efficiency(const Eigen::Ref<const Eigen::VectorXd>& expected_efficiency,
                             const Eigen::Ref<const Eigen::VectorXd>& probabilities) {
  if (expected_efficiency.size() != probabilities.size())
    throw std::domain_error("asymptotic_efficiency: size mismatch");
  if ((probabilities.array() < 0.0).any() || (probabilities.array() > 1.0).any() ||
      std::abs(probabilities.sum() - 1.0) > 1e-9)
    throw std::domain_error("asymptotic_efficiency: probabilities are not on the simplex");
  return expected_efficiency.dot(probabilities);
}

Eigen::VectorXd asymptotic_throughput(const Eigen::Ref<const Eigen::MatrixXd>& expected_throughput,
                                      const Eigen::Ref<const Eigen::VectorXd>& probabilities) {
  if (expected_throughput.cols() != probabilities.size())
    throw std::domain_error("asymptotic_throughput: size mismatch");
  if ((probabilities.array() < 0.0).any() || std::abs(probabilities.sum() - 1.0) > 1e-9)
    throw std::domain_error("asymptotic_throughput: probabilities are not on the simplex");
  return expected_throughput * probabilities;
}

ShareEstimate expected_share(std::size_t group, const Eigen::Ref<const Eigen::VectorXd>& coverage,
                             std::span<const int> sizes, double k_sym,
                             const ShareOptions& options) {
  if (static_cast<std::size_t>(coverage.size()) != sizes.size() || group >= sizes.size())
    throw std::domain_error("expected_share: inconsistent inputs");
  std::vector<double> p;
  std::vector<int> u;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i == group)
      continue;
    double pi = coverage(static_cast<Eigen::Index>(i));
    if (!(pi >= -1e-12 && pi <= 1.0 + 1e-12))
      throw std::domain_error("expected_share: coverage probabilities must lie in [0,1]");
    pi = std::clamp(pi, 0.0, 1.0);  // raster sums can overshoot by an ulp
    if (pi == 0.0)
      continue;  // never co-located, contributes a factor of 1
    p.push_back(pi);
    u.push_back(sizes[i]);
  }
  const double uc = sizes[group];

  ShareMethod method = options.method;
  if (method == ShareMethod::automatic)
    method = p.size() <= options.exact_limit ? ShareMethod::exact : ShareMethod::monte_carlo;

  if (method == ShareMethod::exact) {
    if (p.size() > options.exact_limit)
      throw ResourceError("expected_share: " + std::to_string(p.size()) +
                          " co-located candidates exceed the exact enumeration limit");
    // Depth-first walk over the power set of the other groups.
    double sum = 0.0;
    std::function<void(std::size_t, double, double)> walk = [&](std::size_t i, double prob,
                                                                double users) {
      if (prob == 0.0)
        return;
      if (i == p.size()) {
        sum += prob * uc / (uc + users);
        return;
      }
      walk(i + 1, prob * p[i], users + u[i]);
      walk(i + 1, prob * (1.0 - p[i]), users);
    };
    walk(0, 1.0, 0.0);
    return {k_sym * sum, 0.0};
  }

  if (method == ShareMethod::convolution) {
    // pmf of the other groups' user total, one group at a time.
    int max_users = 0;
    for (int ui : u)
      max_users += ui;
    std::vector<double> pmf(static_cast<std::size_t>(max_users) + 1, 0.0);
    pmf[0] = 1.0;
    int reach = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (int x = reach; x >= 0; --x) {
        const double mass = pmf[static_cast<std::size_t>(x)];
        pmf[static_cast<std::size_t>(x + u[i])] += mass * p[i];
        pmf[static_cast<std::size_t>(x)] = mass * (1.0 - p[i]);
      }
      reach += u[i];
    }
    double sum = 0.0;
    for (int x = 0; x <= reach; ++x)
      sum += pmf[static_cast<std::size_t>(x)] * uc / (uc + x);
    return {k_sym * sum, 0.0};
  }

  // Others with equal (p, U) are exchangeable: one binomial draw per class.
  std::map<std::pair<double, int>, int> classes;
  for (std::size_t i = 0; i < p.size(); ++i)
    ++classes[{p[i], u[i]}];
  std::vector<std::binomial_distribution<int>> draws;
  std::vector<double> weight;
  for (const auto& [key, count] : classes) {
    draws.emplace_back(count, key.first);
    weight.push_back(key.second);
  }
  std::mt19937_64 rng(options.seed);
  double mean = 0.0, m2 = 0.0;
  const std::size_t n = std::max<std::size_t>(options.mc_trials, 2);
  for (std::size_t t = 0; t < n; ++t) {
    double users = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i)
      users += weight[i] * draws[i](rng);
    const double x = uc / (uc + users);
    const double delta = x - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (x - mean);
  }
  const double var = m2 / static_cast<double>(n - 1);
  return {k_sym * mean, k_sym * std::sqrt(var / static_cast<double>(n))};
}

double expected_share_homogeneous(std::size_t n_groups, double coverage, double k_sym) {
  if (n_groups < 1)
    throw std::domain_error("expected_share_homogeneous: need at least one group");
  if (!(coverage >= 0.0 && coverage <= 1.0))
    throw std::domain_error("expected_share_homogeneous: coverage must lie in [0,1]");
  const std::size_t n = n_groups - 1;
  double sum = 0.0;
  double binom = 1.0;  // C(n, k)
  for (std::size_t k = 0; k <= n; ++k) {
    sum += binom / static_cast<double>(k + 1) * std::pow(coverage, static_cast<double>(k)) *
           std::pow(1.0 - coverage, static_cast<double>(n - k));
    binom = binom * static_cast<double>(n - k) / static_cast<double>(k + 1);
  }
  return k_sym * sum;
}

// ---------------------------------------------------------------------------

namespace {

/// Strongest active station per support point (ties -> lowest index).
std::vector<int> serving_per_point(const Eigen::MatrixXd& power, AbsState state) {
  std::vector<int> serving(static_cast<std::size_t>(power.rows()), -1);
  for (Eigen::Index i = 0; i < power.rows(); ++i) {
    double best = -1.0;
    for (Eigen::Index b = 0; b < power.cols(); ++b)
      if (state.active(static_cast<std::size_t>(b)) && power(i, b) > best) {
        best = power(i, b);
        serving[static_cast<std::size_t>(i)] = static_cast<int>(b);
      }
  }
  return serving;
}

Eigen::MatrixXd point_powers(const SpatialDistribution& dist, const Network& network) {
  const auto& stations = network.deployment.stations;
  Eigen::MatrixXd power(static_cast<Eigen::Index>(dist.size()),
                        static_cast<Eigen::Index>(stations.size()));
  for (std::size_t i = 0; i < dist.size(); ++i)
    for (std::size_t b = 0; b < stations.size(); ++b)
      power(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) =
          mean_rx_power(dist.points()[i], stations[b], network.pathloss);
  return power;
}

Eigen::ArrayXd point_cdf(const Eigen::MatrixXd& power, Eigen::Index i, AbsState state, int serving,
                         const Network& network) {
  LinkBudget<double> budget;
  budget.signal_rate = 1.0 / power(i, serving);
  budget.noise_var = network.noise_var_w;
  budget.noise_model = network.noise_model;
  budget.interferer_rates.resize(state.active_count() - 1);
  Eigen::Index j = 0;
  for (Eigen::Index b = 0; b < power.cols(); ++b)
    if (b != serving && state.active(static_cast<std::size_t>(b)))
      budget.interferer_rates(j++) = 1.0 / power(i, b);
  return sinr_cdf_at(network.mcs.thresholds(), budget);
}

}  // namespace

struct AsymptoticModel::StateFields {
  Eigen::MatrixXd region;  // groups x stations: integral over A_b of L_c zeta_c^s
  Eigen::MatrixXd shares;  // groups x stations: E[D_c|b] used with this state
};

AsymptoticModel::AsymptoticModel(const Network& network, std::vector<AsymptoticGroup> groups,
                                 ShareOptions share_options)
    : network_(network), groups_(std::move(groups)), share_options_(share_options) {
  const auto n_b = static_cast<Eigen::Index>(network.n_stations());
  const auto n_c = static_cast<Eigen::Index>(groups_.size());
  for (const auto& g : groups_) {
    if (!g.distribution)
      throw std::domain_error("asymptotic group without a spatial distribution");
    if (g.size < 1)
      throw std::domain_error("asymptotic group size must be >= 1");
    auto it = std::find(distributions_.begin(), distributions_.end(), g.distribution.get());
    if (it == distributions_.end()) {
      distributions_.push_back(g.distribution.get());
      power_.push_back(point_powers(*g.distribution, network));
      it = distributions_.end() - 1;
    }
    dist_of_.push_back(static_cast<std::size_t>(it - distributions_.begin()));
    sizes_.push_back(g.size);
  }

  const AbsState all = AbsState::all_active(network.n_stations());
  std::vector<Eigen::VectorXd> cover_by_dist;
  for (std::size_t d = 0; d < distributions_.size(); ++d) {
    const auto serving = serving_per_point(power_[d], all);
    Eigen::VectorXd cover = Eigen::VectorXd::Zero(n_b);
    for (std::size_t i = 0; i < serving.size(); ++i)
      cover(serving[i]) += distributions_[d]->mass()(static_cast<Eigen::Index>(i));
    cover_by_dist.push_back(cover);
  }
  coverage_.resize(n_c, n_b);
  for (Eigen::Index c = 0; c < n_c; ++c)
    coverage_.row(c) = cover_by_dist[dist_of_[static_cast<std::size_t>(c)]].transpose();

  fill_shares(coverage_, shares_, share_err_);
}

void AsymptoticModel::fill_shares(const Eigen::MatrixXd& coverage, Eigen::MatrixXd& shares,
                                  Eigen::MatrixXd& errors) const {
  const auto n_b = coverage.cols();
  const auto n_c = coverage.rows();
  shares.setZero(n_c, n_b);
  errors.setZero(n_c, n_b);
  // Groups sharing (distribution, size) see the same population of others.
  for (Eigen::Index b = 0; b < n_b; ++b) {
    std::map<std::pair<std::size_t, int>, ShareEstimate> cache;
    for (Eigen::Index c = 0; c < n_c; ++c) {
      const auto key = std::make_pair(dist_of_[static_cast<std::size_t>(c)], sizes_[static_cast<std::size_t>(c)]);
      auto it = cache.find(key);
      if (it == cache.end()) {
        ShareOptions opts = share_options_;
        opts.seed = share_options_.seed + static_cast<std::uint64_t>(b * n_c + c);
        it = cache.emplace(key, expected_share(static_cast<std::size_t>(c), coverage.col(b), sizes_,
                                               network_.k_sym, opts)).first;
      }
      shares(c, b) = it->second.value;
      errors(c, b) = it->second.std_error;
    }
  }
}

AsymptoticModel::StateFields AsymptoticModel::evaluate(AbsState state) const {
  const auto n_b = static_cast<Eigen::Index>(network_.n_stations());
  StateFields out;
  out.region.setZero(static_cast<Eigen::Index>(groups_.size()), n_b);
  Eigen::MatrixXd state_cover = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups_.size()), n_b);
  const auto k = static_cast<Eigen::Index>(network_.mcs.size());
  for (std::size_t d = 0; d < distributions_.size(); ++d) {
    const auto& power = power_[d];
    const auto& mass = distributions_[d]->mass();
    const auto serving = serving_per_point(power, state);
    if (share_options_.per_state_coverage) {
      Eigen::VectorXd cover = Eigen::VectorXd::Zero(n_b);
      for (std::size_t i = 0; i < serving.size(); ++i)
        if (serving[i] >= 0)
          cover(serving[i]) += mass(static_cast<Eigen::Index>(i));
      for (std::size_t c = 0; c < groups_.size(); ++c)
        if (dist_of_[c] == d)
          state_cover.row(static_cast<Eigen::Index>(c)) = cover.transpose();
    }
    Eigen::MatrixXd cdf(k, power.rows());
    for (Eigen::Index i = 0; i < power.rows(); ++i)
      if (serving[static_cast<std::size_t>(i)] >= 0)
        cdf.col(i) = point_cdf(power, i, state, serving[static_cast<std::size_t>(i)], network_).matrix();

    std::map<int, Eigen::VectorXd> zeta_by_size;
    for (std::size_t c = 0; c < groups_.size(); ++c) {
      if (dist_of_[c] != d)
        continue;
      const int u = groups_[c].size;
      auto it = zeta_by_size.find(u);
      if (it == zeta_by_size.end()) {
        Eigen::VectorXd zeta = Eigen::VectorXd::Zero(power.rows());
        for (Eigen::Index i = 0; i < power.rows(); ++i)
          if (serving[static_cast<std::size_t>(i)] >= 0)
            zeta(i) = efficiency_from_cdf(cdf.col(i).array().pow(u), network_.mcs);
        it = zeta_by_size.emplace(u, std::move(zeta)).first;
      }
      const Eigen::VectorXd& zeta = it->second;
      for (Eigen::Index i = 0; i < power.rows(); ++i)
        if (serving[static_cast<std::size_t>(i)] >= 0)
          out.region(static_cast<Eigen::Index>(c), serving[static_cast<std::size_t>(i)]) +=
              mass(i) * zeta(i);
    }
  }
  if (share_options_.per_state_coverage) {
    Eigen::MatrixXd errors;
    fill_shares(state_cover, out.shares, errors);
  } else {
    out.shares = shares_;
  }
  return out;
}

double AsymptoticModel::expected_state_efficiency(std::size_t group, AbsState state) const {
  return evaluate(state).region.row(static_cast<Eigen::Index>(group)).sum();
}

double AsymptoticModel::expected_state_throughput(std::size_t group, AbsState state) const {
  const auto c = static_cast<Eigen::Index>(group);
  const auto f = evaluate(state);
  return f.region.row(c).dot(f.shares.row(c));
}

Eigen::MatrixXd AsymptoticModel::throughput_matrix(std::span<const AbsState> states) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(groups_.size()), static_cast<Eigen::Index>(states.size()));
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto f = evaluate(states[s]);
    m.col(static_cast<Eigen::Index>(s)) = f.region.cwiseProduct(f.shares).rowwise().sum();
  }
  return m;
}

Eigen::MatrixXd AsymptoticModel::efficiency_matrix(std::span<const AbsState> states) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(groups_.size()), static_cast<Eigen::Index>(states.size()));
  for (std::size_t s = 0; s < states.size(); ++s)
    m.col(static_cast<Eigen::Index>(s)) = evaluate(states[s]).region.rowwise().sum();
  return m;
}

double expected_state_efficiency(const SpatialDistribution& dist, int group_size, AbsState state,
                                 const Network& network) {
  if (dist.resolution() > 0.0 && network.n_stations() > 1 &&
      dist.resolution() > network.deployment.min_pairwise_distance())
    spdlog::warn("raster resolution {} m is coarser than the closest station pair ({} m)",
                 dist.resolution(), network.deployment.min_pairwise_distance());
  auto shared = std::make_shared<const SpatialDistribution>(dist);
  AsymptoticModel model(network, {{shared, group_size}});
  return model.expected_state_efficiency(0, state);
}

double raster_relative_change(const Network& network, int group_size, AbsState state,
                              double resolution_m) {
  const World& w = network.deployment.world;
  const double coarse =
      expected_state_efficiency(SpatialDistribution::uniform(w, resolution_m), group_size, state, network);
  const double fine = expected_state_efficiency(SpatialDistribution::uniform(w, 0.5 * resolution_m),
                                                group_size, state, network);
  if (fine == 0.0)
    return coarse == 0.0 ? 0.0 : 1.0;
  return std::abs(coarse - fine) / std::abs(fine);
}

}  // namespace absf
