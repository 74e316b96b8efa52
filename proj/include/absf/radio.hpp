#pragma once

// Link-level model: log-distance pathloss, the closed-form SINR distribution
// under Rayleigh fading with random (squared Gaussian) noise, the CDF of the
// best SINR in a relay group, and MCS-integrated transmission efficiency.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "absf/geometry.hpp"

namespace absf {

/// squared_gaussian: Z = G^2 with G ~ N(0, N). constant: Z = N (what the
/// simulator uses).
enum class NoiseModel { squared_gaussian, constant };

/// Exponential-fading link seen by one receiver. All rates are reciprocals of
/// average received powers (1/W); noise_var is the Gaussian noise variance (W).
template <typename Scalar = double>
struct LinkBudget {
  using Rates = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Scalar signal_rate = Scalar(1);
  Rates interferer_rates;
  Scalar noise_var = Scalar(0);
  NoiseModel noise_model = NoiseModel::squared_gaussian;

  void validate() const {
    if (!(signal_rate > Scalar(0)) || !std::isfinite(signal_rate))
      throw std::domain_error("link budget: signal rate must be positive");
    if (interferer_rates.size() > 0 && !(interferer_rates > Scalar(0)).all())
      throw std::domain_error("link budget: interferer rates must be positive");
    if (!(noise_var >= Scalar(0)))
      throw std::domain_error("link budget: noise variance must be non-negative");
    // The closed form degenerates to F == 0 here, which is not a distribution.
    if (noise_var == Scalar(0) && interferer_rates.size() == 0)
      throw std::domain_error("link budget: no noise and no interferers");
  }
};

/// CDF of SINR = S / (Z + sum I_j) at x >= 0, with S ~ Exp(signal_rate),
/// I_j ~ Exp(rate_j), Z the square of a zero-mean Gaussian of variance N.
template <typename Scalar>
Scalar sinr_cdf(Scalar x, const LinkBudget<Scalar>& budget) {
  if (!(x >= Scalar(0)))
    throw std::domain_error("sinr_cdf: x must be non-negative");
  budget.validate();
  using std::exp;
  using std::sqrt;
  const Scalar ls = budget.signal_rate;
  const Scalar noise_term = budget.noise_model == NoiseModel::constant
                                ? exp(-ls * budget.noise_var * x)
                                : Scalar(1) / sqrt(Scalar(1) + Scalar(2) * ls * budget.noise_var * x);
  Scalar interference_term = Scalar(1);
  if (budget.interferer_rates.size() > 0)
    interference_term = (budget.interferer_rates / (budget.interferer_rates + x * ls)).prod();
  return Scalar(1) - noise_term * interference_term;
}

/// sinr_cdf evaluated at every entry of `x` (all entries must be >= 0).
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> sinr_cdf_at(
    const Eigen::ArrayBase<Derived>& x, const LinkBudget<typename Derived::Scalar>& budget) {
  using Scalar = typename Derived::Scalar;
  using Column = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  if (x.size() > 0 && !(x >= Scalar(0)).all())
    throw std::domain_error("sinr_cdf: x must be non-negative");
  budget.validate();
  const Scalar ls = budget.signal_rate;
  Column tail = budget.noise_model == NoiseModel::constant
                    ? Column((-ls * budget.noise_var * x).exp())
                    : Column((Scalar(1) + Scalar(2) * ls * budget.noise_var * x).rsqrt());
  for (Eigen::Index j = 0; j < budget.interferer_rates.size(); ++j) {
    const Scalar lj = budget.interferer_rates(j);
    tail *= lj / (lj + x * ls);
  }
  return Scalar(1) - tail;
}

/// CDF of the member-wise max SINR with independent members (product form).
template <typename Scalar>
Scalar group_cdf_exact(Scalar x, std::span<const LinkBudget<Scalar>> members) {
  if (members.empty())
    throw std::domain_error("group_cdf_exact: group has no members");
  Scalar f = Scalar(1);
  for (const auto& m : members)
    f *= sinr_cdf(x, m);
  return f;
}

/// Centre-of-gravity approximation: every member sees the centroid budget.
template <typename Scalar>
Scalar group_cdf_centroid(Scalar x, const LinkBudget<Scalar>& centroid, int group_size) {
  if (group_size < 1)
    throw std::domain_error("group_cdf_centroid: group size must be >= 1");
  using std::pow;
  return pow(sinr_cdf(x, centroid), group_size);
}

/// One modulation-and-coding scheme: SINR interval [t_min, t_max) in linear
/// units mapped to an average number of bits per symbol.
struct McsEntry {
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
  double bits_per_symbol = 0.0;
};

class McsTable {
public:
  McsTable() = default;
  explicit McsTable(std::vector<McsEntry> entries);

  /// 15-entry CQI-style table (thresholds in dB, LTE spectral efficiencies).
  static McsTable cqi_default();

  /// CSV with header `t_min_db,t_max_db,bits_per_symbol`; `inf` / `-inf`
  /// accepted for the open ends.
  static McsTable load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  const std::vector<McsEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Finite thresholds t_min(0) .. t_min(K-1); the last t_max is +inf.
  const Eigen::ArrayXd& thresholds() const { return thresholds_; }
  const Eigen::ArrayXd& bits() const { return bits_; }

  double max_bits() const { return entries_.empty() ? 0.0 : entries_.back().bits_per_symbol; }

  /// Index of the entry containing `sinr`, or -1 if below the first threshold.
  int select(double sinr) const;

private:
  std::vector<McsEntry> entries_;
  Eigen::ArrayXd thresholds_;
  Eigen::ArrayXd bits_;
};

/// Efficiency from the group CDF already evaluated at mcs.thresholds().
/// cdf_at_thresholds(k) = F(t_min of entry k); F(+inf) = 1.
template <typename Derived>
typename Derived::Scalar efficiency_from_cdf(const Eigen::ArrayBase<Derived>& cdf_at_thresholds,
                                             const McsTable& mcs) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index k = cdf_at_thresholds.size();
  Scalar eff = Scalar(0);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Scalar upper = (i + 1 < k) ? cdf_at_thresholds(i + 1) : Scalar(1);
    eff += Scalar(mcs.bits()(i)) * (upper - cdf_at_thresholds(i));
  }
  return eff;
}

/// Average bits per symbol when the fastest MCS allowed by the group's SINR is
/// used: sum_k b_k [F(T_k^max) - F(T_k^min)]. `cdf` is any callable x -> F(x).
template <typename Cdf>
double transmission_efficiency(Cdf&& cdf, const McsTable& mcs) {
  Eigen::ArrayXd f(static_cast<Eigen::Index>(mcs.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i)
    f(i) = static_cast<double>(cdf(mcs.thresholds()(i)));
  return efficiency_from_cdf(f, mcs);
}

/// PL(dB) = ref_loss_db + 10 * exponent * log10(max(d, min_distance) / ref_distance).
struct PathlossModel {
  double ref_loss_db = 128.1;
  double ref_distance_m = 1000.0;
  double exponent = 3.76;
  double min_distance_m = 1.0;

  void validate() const;
  double loss_db(double distance_m) const;
  /// Linear power gain 10^(-PL/10).
  double gain(double distance_m) const;
};

struct BaseStation {
  int id = 0;
  Point position = Point::Zero();
  double tx_power_dbm = 24.0;

  double tx_power_w() const { return dbm_to_watt(tx_power_dbm); }
};

/// Average received power (W) at `point` from `bs`.
double mean_rx_power(const Point& point, const BaseStation& bs, const PathlossModel& pathloss);

/// Budget at `point` served by `serving`, interfered by every other station
/// in `active`. Throws std::domain_error if `serving` is not in `active`.
LinkBudget<double> link_budget_at(const Point& point, const BaseStation& serving,
                                  std::span<const BaseStation> active,
                                  const PathlossModel& pathloss, double noise_var_w);

}  // namespace absf
