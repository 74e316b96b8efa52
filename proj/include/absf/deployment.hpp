#pragma once

#include <string>
#include <vector>

#include "absf/geometry.hpp"
#include "absf/radio.hpp"

namespace absf {

/// The set of base stations B and the world rectangle they cover.
struct Deployment {
  World world;
  std::vector<BaseStation> stations;

  std::size_t size() const { return stations.size(); }

  /// CSV `id,x_m,y_m,tx_power_dbm`. Stations keep file order; ids must be unique.
  static Deployment load_csv(const std::string& path, const World& world);
  void save_csv(const std::string& path) const;

  double min_pairwise_distance() const;
};

/// Hexagonal layout: centre of the world, then hex rings of spacing `isd_m`,
/// first `n` sites taken in ring order. Equal transmit powers.
/// Throws std::domain_error if a site falls outside the world.
Deployment generate_grid_deployment(int n = 7, double isd_m = 50.0, double power_dbm = 23.9794,
                                    World world = {150.0, 150.0});

}  // namespace absf
