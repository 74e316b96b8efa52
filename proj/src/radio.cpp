#include "absf/radio.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace absf {

namespace {

double parse_db(const std::string& field) {
  std::string s;
  for (char c : field)
    if (!std::isspace(static_cast<unsigned char>(c)))
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "inf" || s == "+inf")
    return std::numeric_limits<double>::infinity();
  if (s == "-inf")
    return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size())
    throw std::invalid_argument("bad numeric field '" + field + "'");
  return v;
}

std::string format_db(double linear) {
  if (std::isinf(linear))
    return "inf";
  if (linear == 0.0)
    return "-inf";
  std::ostringstream os;
  os.precision(17);
  os << linear_to_db(linear);
  return os.str();
}

}  // namespace

McsTable::McsTable(std::vector<McsEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty())
    throw std::domain_error("MCS table is empty");
  if (!(entries_.front().t_min >= 0.0))
    throw std::domain_error("MCS table: first t_min must be >= 0");
  if (!std::isinf(entries_.back().t_max))
    throw std::domain_error("MCS table: last t_max must be +inf");
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& e = entries_[k];
    if (!(e.t_max > e.t_min))
      throw std::domain_error("MCS table: entry " + std::to_string(k) + " has t_max <= t_min");
    if (!(e.bits_per_symbol >= 0.0))
      throw std::domain_error("MCS table: negative bits per symbol");
    if (k + 1 < entries_.size()) {
      if (e.t_max != entries_[k + 1].t_min)
        throw std::domain_error("MCS table: entries " + std::to_string(k) + " and " +
                                std::to_string(k + 1) + " are not contiguous");
      if (!(entries_[k + 1].bits_per_symbol > e.bits_per_symbol))
        throw std::domain_error("MCS table: bits per symbol must strictly increase");
    }
  }
  const auto n = static_cast<Eigen::Index>(entries_.size());
  thresholds_.resize(n);
  bits_.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    thresholds_(k) = entries_[static_cast<std::size_t>(k)].t_min;
    bits_(k) = entries_[static_cast<std::size_t>(k)].bits_per_symbol;
  }
}

McsTable McsTable::cqi_default() {
  // CQI 1..15: switching SINR (dB) and spectral efficiency (bits/symbol).
  static constexpr double kThresholdDb[15] = {-6.7, -4.7, -2.3, 0.2,  2.4,  4.3,  5.9, 8.1,
                                              10.3, 11.7, 14.1, 16.3, 18.7, 21.0, 22.7};
  static constexpr double kBits[15] = {0.1523, 0.2344, 0.3770, 0.6016, 0.8770,
                                       1.1758, 1.4766, 1.9141, 2.4063, 2.7305,
                                       3.3223, 3.9023, 4.5234, 5.1152, 5.5547};
  std::vector<McsEntry> entries;
  for (int k = 0; k < 15; ++k) {
    const double hi = k + 1 < 15 ? db_to_linear(kThresholdDb[k + 1])
                                 : std::numeric_limits<double>::infinity();
    entries.push_back({db_to_linear(kThresholdDb[k]), hi, kBits[k]});
  }
  return McsTable(std::move(entries));
}

McsTable McsTable::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open MCS table '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("MCS table '" + path + "' is empty");
  line.erase(std::remove_if(line.begin(), line.end(), ::isspace), line.end());
  if (line != "t_min_db,t_max_db,bits_per_symbol")
    throw std::runtime_error("MCS table '" + path + "': unexpected header '" + line + "'");
  std::vector<McsEntry> entries;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw std::runtime_error("MCS table '" + path + "' line " + std::to_string(lineno) +
                               ": expected 3 fields");
    try {
      const double lo_db = parse_db(a);
      const double hi_db = parse_db(b);
      entries.push_back({std::isinf(lo_db) && lo_db < 0 ? 0.0 : db_to_linear(lo_db),
                         std::isinf(hi_db) ? std::numeric_limits<double>::infinity()
                                           : db_to_linear(hi_db),
                         parse_db(c)});
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("MCS table '" + path + "' line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return McsTable(std::move(entries));
}

void McsTable::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write MCS table '" + path + "'");
  out << "t_min_db,t_max_db,bits_per_symbol\n";
  out.precision(17);
  for (const auto& e : entries_)
    out << format_db(e.t_min) << ',' << format_db(e.t_max) << ',' << e.bits_per_symbol << '\n';
}

int McsTable::select(double sinr) const {
  const auto* begin = thresholds_.data();
  const auto* end = begin + thresholds_.size();
  const auto* it = std::upper_bound(begin, end, sinr);
  return static_cast<int>(it - begin) - 1;
}

void PathlossModel::validate() const {
  if (!(exponent > 0.0))
    throw std::domain_error("pathloss exponent must be positive");
  if (!(min_distance_m > 0.0))
    throw std::domain_error("pathloss min distance must be positive");
  if (!(ref_distance_m > 0.0))
    throw std::domain_error("pathloss reference distance must be positive");
}

double PathlossModel::loss_db(double distance_m) const {
  const double d = std::max(distance_m, min_distance_m);
  return ref_loss_db + 10.0 * exponent * std::log10(d / ref_distance_m);
}

double PathlossModel::gain(double distance_m) const {
  return db_to_linear(-loss_db(distance_m));
}

double mean_rx_power(const Point& point, const BaseStation& bs, const PathlossModel& pathloss) {
  return bs.tx_power_w() * pathloss.gain((point - bs.position).norm());
}

LinkBudget<double> link_budget_at(const Point& point, const BaseStation& serving,
                                  std::span<const BaseStation> active,
                                  const PathlossModel& pathloss, double noise_var_w) {
  const auto is_serving = [&](const BaseStation& b) { return b.id == serving.id; };
  if (std::none_of(active.begin(), active.end(), is_serving))
    throw std::domain_error("link_budget_at: serving station " + std::to_string(serving.id) +
                            " is not active");
  LinkBudget<double> budget;
  budget.signal_rate = 1.0 / mean_rx_power(point, serving, pathloss);
  budget.noise_var = noise_var_w;
  budget.interferer_rates.resize(static_cast<Eigen::Index>(active.size()) - 1);
  Eigen::Index j = 0;
  for (const auto& b : active)
    if (!is_serving(b))
      budget.interferer_rates(j++) = 1.0 / mean_rx_power(point, b, pathloss);
  return budget;
}

}  // namespace absf
