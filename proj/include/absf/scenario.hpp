#pragma once

// Scenario files: JSON with units spelled out in key names. Relative paths
// are resolved against the directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "absf/asymptotic.hpp"
#include "absf/sim.hpp"

namespace absf {

struct DeploymentSpec {
  std::string type = "grid";  // "grid" | "file"
  int n_stations = 7;
  double isd_m = 50.0;
  double power_dbm = 23.9794;  // 250 mW
  std::string path;            // type == "file"
};

struct RadioSpec {
  double noise_dbm = -101.0;
  double k_sym_per_s = 16.8e6;
  std::string mcs = "default";  // or CSV path
  double pathloss_ref_db = 128.1;
  double pathloss_ref_distance_m = 1000.0;
  double pathloss_exponent = 3.76;
  double min_distance_m = 1.0;
};

struct GroupSpec {
  int count = 50;
  int size_min = 1;
  int size_max = 5;
  /// Forces every group to this size when set (model validation runs).
  std::optional<int> fixed_size;
  double member_radius_m = 10.0;
  /// Centroid placement: "uniform", "point(x,y)" or a raster CSV path.
  std::string spatial = "uniform";
};

struct ValidationSpec {
  std::vector<std::uint64_t> state_ids;  // empty -> all-active plus a seeded sample
  std::size_t n_states = 10;
  std::vector<int> sizes{1, 5};
  double duration_s = 500.0;
};

struct Scenario {
  std::string name = "scenario";
  World world{150.0, 150.0};
  DeploymentSpec deployment;
  RadioSpec radio;
  GroupSpec groups;
  SimConfig sim;  // seed is overridden per run
  std::optional<std::size_t> max_states;
  std::vector<std::string> policies{"legacy"};
  std::vector<std::uint64_t> seeds{1};
  ValidationSpec validation;
  std::filesystem::path base_dir = ".";

  /// Throws std::domain_error (or std::invalid_argument for a bad policy name).
  void validate() const;
  Network network() const;
  /// Groups placed from `groups` with RNG streams keyed by `seed`.
  Snapshot snapshot(std::uint64_t seed) const;
  std::filesystem::path resolve(const std::string& path) const;

  static Scenario load(const std::filesystem::path& path);
};

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);

/// Placement shared by the harness and the acceptance suite.
Snapshot place_groups(const World& world, const GroupSpec& spec, const SpatialDistribution* where,
                      std::uint64_t seed);

}  // namespace absf
