#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls the closed forms under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <boost/math/distributions/chi_squared.hpp>

#include "absf/optimizer.hpp"
#include "absf/radio.hpp"

namespace oracle {

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// P(S / (Z + sum I_j) <= x) by sampling: S, I_j exponential with the given
/// rates, Z = G^2 with G ~ N(0, noise_var).
inline std::vector<Estimate> sinr_cdf_mc(const absf::LinkBudget<double>& b,
                                         const std::vector<double>& xs, std::size_t samples,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> sig(b.signal_rate);
  std::vector<std::exponential_distribution<double>> interf;
  for (Eigen::Index j = 0; j < b.interferer_rates.size(); ++j)
    interf.emplace_back(b.interferer_rates(j));
  std::normal_distribution<double> gauss(0.0, std::sqrt(b.noise_var));
  std::vector<double> hits(xs.size(), 0.0);
  for (std::size_t n = 0; n < samples; ++n) {
    const double s = sig(rng);
    double denom = 0.0;
    for (auto& d : interf)
      denom += d(rng);
    if (b.noise_var > 0.0) {
      const double g = gauss(rng);
      denom += g * g;
    }
    const double sinr = s / denom;
    for (std::size_t i = 0; i < xs.size(); ++i)
      hits[i] += sinr <= xs[i] ? 1.0 : 0.0;
  }
  std::vector<Estimate> out;
  for (double h : hits) {
    const double p = h / static_cast<double>(samples);
    out.push_back({p, std::sqrt(p * (1.0 - p) / static_cast<double>(samples))});
  }
  return out;
}

/// E[U_c / (U_c + sum of co-located others)] * k_sym by sampling placements.
inline Estimate share_mc(std::size_t group, const std::vector<double>& p, const std::vector<int>& u,
                         double k_sym, std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double sum = 0.0, sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    double others = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (i != group && unit(rng) < p[i])
        others += u[i];
    const double x = k_sym * u[group] / (u[group] + others);
    sum += x;
    sq += x * x;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(sq / n - mean * mean, 0.0) / n)};
}

/// Best PF objective over a simplex grid, refined hierarchically: a coarse
/// full grid, then repeated local grids of shrinking step around the incumbent
/// until `final_step`. Exhaustive at every level within its window.
inline double pf_grid_search(const absf::ThroughputMatrix& m, double final_step = 1e-3) {
  const auto n = static_cast<int>(m.n_states());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.groups());
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_p = Eigen::VectorXd::Constant(n, 1.0 / n);

  // Enumerate p = centre + step * k with integer k, sum k = 0, |k_i| <= radius,
  // p >= 0 (radius < 0 means the full simplex at this step).
  std::function<void(const Eigen::VectorXd&, double, int)> level = [&](const Eigen::VectorXd& centre,
                                                                     double step, int radius) {
    Eigen::VectorXd p(n);
    std::function<void(int, double)> rec = [&](int i, double remaining) {
      if (i == n - 1) {
        p(i) = remaining;
        if (p(i) < -1e-12)
          return;
        if (radius >= 0 && std::abs(p(i) - centre(i)) > radius * step + 1e-12)
          return;
        p(i) = std::max(p(i), 0.0);
        const double f = absf::pf_objective(m, p, zero);
        if (f > best) {
          best = f;
          best_p = p;
        }
        return;
      }
      double lo = 0.0, hi = remaining;
      if (radius >= 0) {
        lo = std::max(0.0, centre(i) - radius * step);
        hi = std::min(remaining, centre(i) + radius * step);
      }
      const long k0 = std::lround(std::ceil((lo - (radius >= 0 ? centre(i) : 0.0)) / step - 1e-9));
      const long k1 = std::lround(std::floor((hi - (radius >= 0 ? centre(i) : 0.0)) / step + 1e-9));
      for (long k = k0; k <= k1; ++k) {
        p(i) = (radius >= 0 ? centre(i) : 0.0) + static_cast<double>(k) * step;
        if (p(i) < -1e-12 || p(i) > remaining + 1e-12)
          continue;
        rec(i + 1, remaining - p(i));
      }
    };
    rec(0, 1.0);
  };

  double step = n <= 3 ? 0.01 : 0.05;
  level(best_p, step, -1);
  while (step > final_step * 1.0001) {
    step = std::max(step / 5.0, final_step);
    level(Eigen::VectorXd(best_p), step, 6);
  }
  return best;
}

/// Upper critical value of chi-square with `dof` degrees of freedom.
inline double chi2_critical(double alpha, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

/// Pearson statistic for observed counts against expected probabilities;
/// cells with expectation below 5 are merged into one.
inline std::pair<double, double> chi2_statistic(const std::vector<double>& observed,
                                                const std::vector<double>& prob, double total) {
  double stat = 0.0, dof = -1.0, merged_o = 0.0, merged_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = prob[i] * total;
    if (e < 5.0) {
      merged_o += observed[i];
      merged_e += e;
      continue;
    }
    stat += (observed[i] - e) * (observed[i] - e) / e;
    dof += 1.0;
  }
  if (merged_e > 0.0) {
    stat += (merged_o - merged_e) * (merged_o - merged_e) / merged_e;
    dof += 1.0;
  }
  return {stat, dof};
}

}  // namespace oracle
