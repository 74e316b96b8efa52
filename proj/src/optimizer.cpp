#include "absf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "absf/errors.hpp"
#include "absf/random.hpp"

namespace absf {

ThroughputMatrix ThroughputMatrix::from(Eigen::MatrixXd gain, Eigen::VectorXd weights,
                                        std::vector<AbsState> states) {
  ThroughputMatrix m;
  if (weights.size() == 0)
    weights = Eigen::VectorXd::Ones(gain.rows());
  if (states.empty())
    for (Eigen::Index s = 0; s < gain.cols(); ++s)
      states.push_back(AbsState::from_id(static_cast<std::uint64_t>(s)));
  m.gain = std::move(gain);
  m.weights = std::move(weights);
  m.states = std::move(states);
  m.validate();
  return m;
}

void ThroughputMatrix::validate() const {
  if (gain.cols() < 1)
    throw std::domain_error("throughput matrix has no states");
  if (weights.size() != gain.rows())
    throw std::domain_error("throughput matrix: one weight per group required");
  if (static_cast<Eigen::Index>(states.size()) != gain.cols())
    throw std::domain_error("throughput matrix: one state per column required");
  if (!gain.allFinite() || (gain.array() < 0.0).any())
    throw std::domain_error("throughput matrix entries must be finite and non-negative");
  if ((weights.array() <= 0.0).any())
    throw std::domain_error("group weights must be positive");
}

void StateProbabilities::validate() const {
  if (p.size() == 0 || static_cast<std::size_t>(p.size()) != states.size())
    throw std::domain_error("state probabilities: one probability per state required");
  if ((p.array() < 0.0).any() || (p.array() > 1.0).any())
    throw std::domain_error("state probabilities must lie in [0,1]");
  if (std::abs(p.sum() - 1.0) > 1e-9)
    throw std::domain_error("state probabilities must sum to 1");
}

void StateProbabilities::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write probabilities '" + path + "'");
  out.precision(17);
  out << "state_id,prob\n";
  for (std::size_t s = 0; s < states.size(); ++s)
    out << states[s].id() << ',' << p(static_cast<Eigen::Index>(s)) << '\n';
}

StateProbabilities StateProbabilities::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open probabilities '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line.rfind("state_id,prob", 0) != 0)
    throw std::runtime_error("probabilities '" + path + "': unexpected header");
  std::vector<double> p;
  StateProbabilities out;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const auto comma = line.find(',');
    out.states.push_back(AbsState::from_id(std::stoull(line.substr(0, comma))));
    p.push_back(std::stod(line.substr(comma + 1)));
  }
  out.p = Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  out.validate();
  return out;
}

double pf_objective(const ThroughputMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& p,
                    const Eigen::Ref<const Eigen::VectorXd>& offset) {
  const Eigen::VectorXd y = offset + m.gain * p;
  if ((y.array() <= 0.0).any())
    return -std::numeric_limits<double>::infinity();
  return m.weights.dot(y.array().log().matrix());
}

namespace {

struct Reduced {
  ThroughputMatrix m;
  Eigen::VectorXd offset;
  std::vector<std::size_t> excluded;
};

Reduced drop_infeasible(const ThroughputMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& offset,
                        bool strict) {
  std::vector<Eigen::Index> keep;
  Reduced r;
  for (Eigen::Index c = 0; c < m.groups(); ++c) {
    const bool dead = offset(c) <= 0.0 && m.gain.row(c).maxCoeff() <= 0.0;
    if (!dead) {
      keep.push_back(c);
      continue;
    }
    if (strict)
      throw InfeasibleError(static_cast<std::size_t>(c),
                            "group " + std::to_string(c) +
                                " has zero throughput in every state; log objective is unbounded");
    r.excluded.push_back(static_cast<std::size_t>(c));
  }
  if (!r.excluded.empty())
    spdlog::warn("PF solve: {} group(s) with zero throughput in every state excluded",
                 r.excluded.size());
  const auto n = static_cast<Eigen::Index>(keep.size());
  r.m.gain.resize(n, m.n_states());
  r.m.weights.resize(n);
  r.offset.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.m.gain.row(i) = m.gain.row(keep[static_cast<std::size_t>(i)]);
    r.m.weights(i) = m.weights(keep[static_cast<std::size_t>(i)]);
    r.offset(i) = offset(keep[static_cast<std::size_t>(i)]);
  }
  r.m.states = m.states;
  return r;
}


/// max(positive gap, complementarity) with gap_s = (grad_s - lambda) / lambda.
double kkt_residual(const ThroughputMatrix& m, const Eigen::VectorXd& off, const Eigen::VectorXd& p,
                    Eigen::ArrayXd* gap_out = nullptr) {
  const Eigen::VectorXd y = off + m.gain * p;
  const Eigen::VectorXd grad = m.gain.transpose() * (m.weights.array() / y.array()).matrix();
  const double lambda = p.dot(grad);
  const Eigen::ArrayXd gap = (grad.array() - lambda) / lambda;
  if (gap_out)
    *gap_out = gap;
  return std::max(gap.max(0.0).maxCoeff(), (p.array() * gap.abs()).maxCoeff());
}

/// Newton iterations on the support of `p` (equality-constrained, minimum
/// norm when the reduced Hessian is singular). States that are clearly
/// non-binding are dropped first. Exponentiated gradient only shrinks such
/// coordinates geometrically, so this removes the last ~1e-6 of error.
Eigen::VectorXd polish(const ThroughputMatrix& m, const Eigen::VectorXd& off, Eigen::VectorXd p) {
  Eigen::ArrayXd gap;
  kkt_residual(m, off, p, &gap);
  std::vector<Eigen::Index> support;
  for (Eigen::Index s = 0; s < p.size(); ++s) {
    if (gap(s) < -1e-4 && p(s) < 1e-4)
      p(s) = 0.0;
    else if (p(s) > 0.0)
      support.push_back(s);
  }
  p /= p.sum();
  const auto k = static_cast<Eigen::Index>(support.size());
  if (k < 2)
    return p;
  Eigen::MatrixXd gs(m.groups(), k);
  for (Eigen::Index j = 0; j < k; ++j)
    gs.col(j) = m.gain.col(support[static_cast<std::size_t>(j)]);
  Eigen::VectorXd ps(k);
  for (Eigen::Index j = 0; j < k; ++j)
    ps(j) = p(support[static_cast<std::size_t>(j)]);

  auto f = [&](const Eigen::VectorXd& x) {
    const Eigen::ArrayXd y = off.array() + (gs * x).array();
    return (y <= 0.0).any() ? -std::numeric_limits<double>::infinity()
                            : m.weights.dot(y.log().matrix());
  };
  double fx = f(ps);
  for (int it = 0; it < 30; ++it) {
    const Eigen::ArrayXd y = off.array() + (gs * ps).array();
    const Eigen::VectorXd g = gs.transpose() * (m.weights.array() / y).matrix();
    const Eigen::MatrixXd h =
        -(gs.transpose() * (m.weights.array() / y.square()).matrix().asDiagonal() * gs);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = h;
    kkt.topRightCorner(k, 1).setOnes();
    kkt.bottomLeftCorner(1, k).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    rhs.head(k) = -g;
    const Eigen::VectorXd d = kkt.completeOrthogonalDecomposition().solve(rhs).head(k);
    if (!d.allFinite() || d.norm() <= 1e-16)
      break;
    double t = 1.0;
    for (Eigen::Index j = 0; j < k; ++j)
      if (d(j) < 0.0)
        t = std::min(t, -ps(j) / d(j));
    bool moved = false;
    for (int tries = 0; tries < 40 && t > 0.0; ++tries, t *= 0.5) {
      Eigen::VectorXd q = (ps + t * d).cwiseMax(0.0);
      q /= q.sum();
      const double fq = f(q);
      if (fq >= fx) {
        moved = (q - ps).norm() > 0.0;
        ps = q;
        fx = fq;
        break;
      }
    }
    if (!moved)
      break;
  }
  for (Eigen::Index j = 0; j < k; ++j)
    p(support[static_cast<std::size_t>(j)]) = ps(j);
  return p;
}

}  // namespace

PfSolution solve_pf(const ThroughputMatrix& input, const Eigen::Ref<const Eigen::VectorXd>& offset,
                    const SolverOptions& options) {
  input.validate();
  if (offset.size() != input.groups())
    throw std::domain_error("solve_pf: one offset per group required");
  if ((offset.array() < 0.0).any())
    throw std::domain_error("solve_pf: offsets must be non-negative");

  Reduced r = drop_infeasible(input, offset, options.strict_infeasible);
  const ThroughputMatrix& m = r.m;
  const Eigen::Index n_s = m.n_states();

  PfSolution sol;
  sol.excluded_groups = r.excluded;
  sol.probabilities.states = input.states;
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n_s, 1.0 / static_cast<double>(n_s));

  if (m.groups() == 0 || n_s == 1) {
    sol.probabilities.p = p;
    sol.objective = m.groups() == 0 ? 0.0 : pf_objective(m, p, r.offset);
    sol.converged = true;
    return sol;
  }

  // Scale to unit mean gain; argmax is unchanged and the step size becomes
  // dimensionless.
  const double scale = std::max(m.gain.maxCoeff(), r.offset.maxCoeff());
  ThroughputMatrix ms = m;
  ms.gain /= scale;
  const Eigen::VectorXd off = r.offset / scale;
  const double log_scale = m.weights.sum() * std::log(scale);

  double f = pf_objective(ms, p, off);
  double step = 1.0;
  Eigen::VectorXd grad(n_s), q(n_s), expo(n_s);
  for (int it = 0;; ++it) {
    const Eigen::VectorXd y = off + ms.gain * p;
    grad = ms.gain.transpose() * (ms.weights.array() / y.array()).matrix();
    const double lambda = p.dot(grad);
    const Eigen::ArrayXd gap = (grad.array() - lambda) / lambda;
    const double residual = std::max(gap.max(0.0).maxCoeff(), (p.array() * gap.abs()).maxCoeff());
    sol.kkt_residual = residual;
    sol.iterations = it;
    if (options.record_trace)
      sol.trace.push_back(f + log_scale);
    if (residual <= options.kkt_tolerance) {
      sol.converged = true;
      break;
    }
    if (it >= options.max_iterations)
      break;

    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      expo = step * gap.matrix();
      expo.array() -= expo.maxCoeff();
      q = p.array() * expo.array().exp();
      q /= q.sum();
      const double fq = pf_objective(ms, q, off);
      const double predicted = grad.dot(q - p);
      if (fq >= f + 1e-4 * predicted && fq >= f) {
        p = q;
        f = fq;
        accepted = true;
        step = std::min(step * 2.0, 1e8);
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      break;  // no ascent representable in double precision
  }

  // Flush round-off so the result sits exactly on the simplex.
  p = p.cwiseMax(0.0);
  p /= p.sum();
  if (sol.converged) {
    const Eigen::VectorXd refined = polish(ms, off, p);
    const double residual = kkt_residual(ms, off, refined);
    if (pf_objective(ms, refined, off) >= pf_objective(ms, p, off) && residual <= options.kkt_tolerance) {
      p = refined;
      sol.kkt_residual = residual;
    }
  }
  sol.probabilities.p = p;
  sol.objective = pf_objective(m, p, r.offset);
  return sol;
}

PfSolution solve_asymptotic_pf(const ThroughputMatrix& m, const SolverOptions& options) {
  return solve_pf(m, Eigen::VectorXd::Zero(m.groups()), options);
}

History::History(std::size_t window, std::vector<double> alpha)
    : window_(window), alpha_(std::move(alpha)) {
  if (alpha_.size() != window_ + 1)
    throw std::domain_error("history: need window+1 coefficients (current interval first)");
  for (std::size_t k = 0; k < alpha_.size(); ++k) {
    if (!(alpha_[k] >= 0.0))
      throw std::domain_error("history: coefficients must be non-negative");
    if (k > 0 && alpha_[k] > alpha_[k - 1])
      throw std::domain_error("history: older intervals cannot weigh more than newer ones");
  }
  if (!(alpha_.front() > 0.0))
    throw std::domain_error("history: current-interval coefficient must be positive");
}

History History::constant(std::size_t window, double value) {
  return History(window, std::vector<double>(window + 1, value));
}

void History::push(Eigen::VectorXd interval_throughput) {
  if (!past_.empty() && past_.front().size() != interval_throughput.size())
    throw std::domain_error("history: group count changed");
  if (window_ == 0)
    return;
  past_.push_front(std::move(interval_throughput));
  while (past_.size() > window_)
    past_.pop_back();
}

Eigen::VectorXd History::weighted_sum(Eigen::Index groups) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(groups);
  for (std::size_t k = 0; k < past_.size(); ++k) {
    if (past_[k].size() != groups)
      throw std::domain_error("history: group count mismatch");
    sum += alpha_[k + 1] * past_[k];
  }
  return sum;
}

PfSolution solve_dynamic_pf(const ThroughputMatrix& now, const History& history,
                            const SolverOptions& options) {
  ThroughputMatrix scaled = now;
  scaled.gain *= history.current_weight();
  return solve_pf(scaled, history.weighted_sum(now.groups()), options);
}

StateProbabilities solve_max_throughput(const ThroughputMatrix& m) {
  m.validate();
  const Eigen::VectorXd score = m.gain.transpose() * m.weights;
  const double best = score.maxCoeff();
  StateProbabilities out;
  out.states = m.states;
  out.p = (score.array() == best).cast<double>().matrix();
  out.p /= out.p.sum();
  return out;
}

Eigen::VectorXd AbsPattern::activity_ratio() const {
  Eigen::VectorXd ratio = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_stations));
  for (const auto& s : subframes)
    for (std::size_t b = 0; b < n_stations; ++b)
      ratio(static_cast<Eigen::Index>(b)) += s.active(b) ? 1.0 : 0.0;
  if (!subframes.empty())
    ratio /= static_cast<double>(subframes.size());
  return ratio;
}

void AbsPattern::save_txt(const std::string& path) const {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write pattern '" + path + "'");
  for (const auto& s : subframes) {
    for (std::size_t b = 0; b < n_stations; ++b)
      out << (b ? "," : "") << (s.active(b) ? 1 : 0);
    out << '\n';
  }
}

AbsPattern AbsPattern::load_txt(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open pattern '" + path + "'");
  AbsPattern pattern;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    std::stringstream ss(line);
    std::string bit;
    AbsState s;
    std::size_t b = 0;
    for (; std::getline(ss, bit, ','); ++b)
      if (std::stoi(bit))
        s.mask |= std::uint64_t{1} << b;
    if (pattern.subframes.empty())
      pattern.n_stations = b;
    else if (b != pattern.n_stations)
      throw std::runtime_error("pattern '" + path + "': inconsistent station count");
    pattern.subframes.push_back(s);
  }
  return pattern;
}

AbsPattern build_pattern(const StateProbabilities& p, std::size_t n_stations, std::size_t length,
                         std::uint64_t seed) {
  p.validate();
  if (length < 1)
    throw std::domain_error("pattern length must be >= 1");
  std::vector<double> cumulative(static_cast<std::size_t>(p.p.size()));
  std::partial_sum(p.p.data(), p.p.data() + p.p.size(), cumulative.begin());
  const double total = cumulative.back();
  auto rng = make_rng(seed, 0x7061747465726eull);
  AbsPattern pattern;
  pattern.n_stations = n_stations;
  pattern.subframes.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double u = unit_open(rng()) * total;
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    auto idx = static_cast<std::size_t>(it - cumulative.begin());
    idx = std::min(idx, cumulative.size() - 1);
    while (p.p(static_cast<Eigen::Index>(idx)) == 0.0 && idx > 0)  // u landed on a flat step
      --idx;
    pattern.subframes.push_back(p.states[idx]);
  }
  return pattern;
}

AbsPattern fixed_ratio_pattern(int used, int total, std::size_t n_stations, std::size_t length,
                               std::uint64_t seed) {
  if (total < 1 || used < 1 || used > total)
    throw std::domain_error("application ratio must lie in (0, 1]");
  if (length < 1)
    throw std::domain_error("pattern length must be >= 1");
  auto rng = make_rng(seed, 0x6669786564ull);
  AbsPattern pattern;
  pattern.n_stations = n_stations;
  pattern.subframes.assign(length, AbsState{});
  std::vector<int> block(static_cast<std::size_t>(total), 0);
  for (std::size_t b = 0; b < n_stations; ++b) {
    std::fill(block.begin(), block.end(), 0);
    std::fill(block.begin(), block.begin() + used, 1);
    std::shuffle(block.begin(), block.end(), rng);
    for (std::size_t i = 0; i < length; ++i)
      if (block[i % block.size()])
        pattern.subframes[i].mask |= std::uint64_t{1} << b;
  }
  return pattern;
}

}  // namespace absf
