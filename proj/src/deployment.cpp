#include "absf/deployment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace absf {

Deployment Deployment::load_csv(const std::string& path, const World& world) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open deployment '" + path + "'");
  std::string line;
  std::getline(in, line);
  line.erase(std::remove_if(line.begin(), line.end(), ::isspace), line.end());
  if (line != "id,x_m,y_m,tx_power_dbm")
    throw std::runtime_error("deployment '" + path + "': unexpected header '" + line + "'");
  Deployment d;
  d.world = world;
  std::set<int> ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#')
      continue;
    std::stringstream ss(line);
    std::string f[4];
    for (int i = 0; i < 4; ++i)
      if (!std::getline(ss, f[i], i < 3 ? ',' : '\n'))
        throw std::runtime_error("deployment '" + path + "' line " + std::to_string(lineno) +
                                 ": expected 4 fields");
    BaseStation bs;
    bs.id = std::stoi(f[0]);
    bs.position = Point(std::stod(f[1]), std::stod(f[2]));
    bs.tx_power_dbm = std::stod(f[3]);
    if (!ids.insert(bs.id).second)
      throw std::runtime_error("deployment '" + path + "': duplicate station id " + f[0]);
    if (!world.contains(bs.position))
      throw std::domain_error("deployment '" + path + "': station " + f[0] +
                              " outside the world rectangle");
    d.stations.push_back(bs);
  }
  if (d.stations.empty())
    throw std::runtime_error("deployment '" + path + "' has no stations");
  return d;
}

void Deployment::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write deployment '" + path + "'");
  out.precision(17);
  out << "id,x_m,y_m,tx_power_dbm\n";
  for (const auto& s : stations)
    out << s.id << ',' << s.position.x() << ',' << s.position.y() << ',' << s.tx_power_dbm << '\n';
}

double Deployment::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < stations.size(); ++i)
    for (std::size_t j = i + 1; j < stations.size(); ++j)
      best = std::min(best, (stations[i].position - stations[j].position).norm());
  return best;
}

Deployment generate_grid_deployment(int n, double isd_m, double power_dbm, World world) {
  if (n < 1)
    throw std::domain_error("grid deployment needs at least one station");
  if (!(isd_m > 0.0))
    throw std::domain_error("grid deployment: ISD must be positive");

  // Axial hex coordinates, ring by ring, each ring walked from the +x corner.
  static constexpr int kDirs[6][2] = {{-1, 1}, {-1, 0}, {0, -1}, {1, -1}, {1, 0}, {0, 1}};
  std::vector<std::pair<int, int>> axial{{0, 0}};
  for (int ring = 1; static_cast<int>(axial.size()) < n; ++ring) {
    int q = ring, r = 0;
    for (const auto& dir : kDirs)
      for (int step = 0; step < ring; ++step) {
        axial.emplace_back(q, r);
        q += dir[0];
        r += dir[1];
      }
  }

  Deployment d;
  d.world = world;
  const Point c = world.center();
  const double h = std::sqrt(3.0) / 2.0;
  for (int i = 0; i < n; ++i) {
    const auto [q, r] = axial[static_cast<std::size_t>(i)];
    const Point p = c + isd_m * Point(q + 0.5 * r, h * r);
    if (!world.contains(p))
      throw std::domain_error("grid deployment: station " + std::to_string(i) +
                              " does not fit in the world rectangle");
    d.stations.push_back({i, p, power_dbm});
  }
  return d;
}

}  // namespace absf
