#include "absf/scenario.hpp"

#include <fstream>
#include <stdexcept>

#include "absf/random.hpp"

namespace absf {

using nlohmann::json;

namespace {

bool is_builtin_spatial(const std::string& spec) {
  return spec == "uniform" || spec.rfind("point(", 0) == 0;
}

std::string mode_name(EfficiencyMode m) { return m == EfficiencyMode::exact ? "exact" : "centroid"; }

EfficiencyMode parse_mode(const std::string& s) {
  if (s == "exact")
    return EfficiencyMode::exact;
  if (s == "centroid")
    return EfficiencyMode::centroid;
  throw std::domain_error("efficiency_mode must be 'exact' or 'centroid', got '" + s + "'");
}

const std::pair<ShareMethod, const char*> kShareMethods[] = {
    {ShareMethod::automatic, "auto"},
    {ShareMethod::exact, "exact"},
    {ShareMethod::monte_carlo, "monte_carlo"},
    {ShareMethod::convolution, "convolution"}};

std::string share_method_name(ShareMethod m) {
  for (const auto& [k, name] : kShareMethods)
    if (k == m)
      return name;
  return "auto";
}

ShareMethod parse_share_method(const std::string& s) {
  for (const auto& [k, name] : kShareMethods)
    if (s == name)
      return k;
  throw std::domain_error("share_method must be auto, exact, monte_carlo or convolution, got '" + s + "'");
}

std::string coverage_name(bool per_state) { return per_state ? "per_state" : "all_active"; }

bool parse_coverage(const std::string& s) {
  if (s == "per_state")
    return true;
  if (s == "all_active")
    return false;
  throw std::domain_error("share_coverage must be 'all_active' or 'per_state', got '" + s + "'");
}

}  // namespace

void to_json(json& j, const Scenario& s) {
  const SimConfig& c = s.sim;
  j = json{
      {"name", s.name},
      {"world", {{"width_m", s.world.width}, {"height_m", s.world.height}}},
      {"deployment",
       {{"type", s.deployment.type},
        {"n_stations", s.deployment.n_stations},
        {"isd_m", s.deployment.isd_m},
        {"power_dbm", s.deployment.power_dbm},
        {"path", s.deployment.path}}},
      {"radio",
       {{"noise_dbm", s.radio.noise_dbm},
        {"k_sym_per_s", s.radio.k_sym_per_s},
        {"mcs", s.radio.mcs},
        {"pathloss_ref_db", s.radio.pathloss_ref_db},
        {"pathloss_ref_distance_m", s.radio.pathloss_ref_distance_m},
        {"pathloss_exponent", s.radio.pathloss_exponent},
        {"min_distance_m", s.radio.min_distance_m}}},
      {"groups",
       {{"count", s.groups.count},
        {"size_min", s.groups.size_min},
        {"size_max", s.groups.size_max},
        {"fixed_size", s.groups.fixed_size ? json(*s.groups.fixed_size) : json(nullptr)},
        {"member_radius_m", s.groups.member_radius_m},
        {"spatial", s.groups.spatial}}},
      {"mobility",
       {{"enabled", c.mobile},
        {"speed_min_mps", c.speed_min_mps},
        {"speed_max_mps", c.speed_max_mps},
        {"pause_s", c.pause_s},
        {"step_ms", c.mobility_step_s * 1e3}}},
      {"sim",
       {{"duration_s", c.duration_s},
        {"subframe_ms", c.subframe_s * 1e3},
        {"t_interval_ms", c.interval_s * 1e3},
        {"history_window", c.history_window},
        {"alpha", c.alpha},
        {"closed_loop_history", c.closed_loop_history},
        {"pattern_length", c.pattern_length},
        {"efficiency_mode", mode_name(c.efficiency_mode)},
        {"raster_resolution_m", c.raster_resolution_m},
        {"share_mc_trials", c.share_mc_trials},
        {"share_method", share_method_name(c.share_method)},
        {"share_coverage", coverage_name(c.share_per_state)},
        {"jfi_window_s", c.jfi_window_s},
        {"batches", c.batches},
        {"series_step_s", c.series_step_s},
        {"max_states", s.max_states ? json(*s.max_states) : json(nullptr)}}},
      {"policies", s.policies},
      {"seeds", s.seeds},
      {"validation",
       {{"state_ids", s.validation.state_ids},
        {"n_states", s.validation.n_states},
        {"sizes", s.validation.sizes},
        {"duration_s", s.validation.duration_s}}},
  };
}

void from_json(const json& j, Scenario& s) {
  const Scenario d;
  s.name = j.value("name", d.name);
  if (auto w = j.find("world"); w != j.end()) {
    s.world.width = w->value("width_m", d.world.width);
    s.world.height = w->value("height_m", d.world.height);
  }
  if (auto x = j.find("deployment"); x != j.end()) {
    s.deployment.type = x->value("type", d.deployment.type);
    s.deployment.n_stations = x->value("n_stations", d.deployment.n_stations);
    s.deployment.isd_m = x->value("isd_m", d.deployment.isd_m);
    s.deployment.power_dbm = x->value("power_dbm", d.deployment.power_dbm);
    s.deployment.path = x->value("path", d.deployment.path);
  }
  if (auto x = j.find("radio"); x != j.end()) {
    s.radio.noise_dbm = x->value("noise_dbm", d.radio.noise_dbm);
    s.radio.k_sym_per_s = x->value("k_sym_per_s", d.radio.k_sym_per_s);
    s.radio.mcs = x->value("mcs", d.radio.mcs);
    s.radio.pathloss_ref_db = x->value("pathloss_ref_db", d.radio.pathloss_ref_db);
    s.radio.pathloss_ref_distance_m =
        x->value("pathloss_ref_distance_m", d.radio.pathloss_ref_distance_m);
    s.radio.pathloss_exponent = x->value("pathloss_exponent", d.radio.pathloss_exponent);
    s.radio.min_distance_m = x->value("min_distance_m", d.radio.min_distance_m);
  }
  if (auto x = j.find("groups"); x != j.end()) {
    s.groups.count = x->value("count", d.groups.count);
    s.groups.size_min = x->value("size_min", d.groups.size_min);
    s.groups.size_max = x->value("size_max", d.groups.size_max);
    s.groups.fixed_size.reset();
    if (auto f = x->find("fixed_size"); f != x->end() && !f->is_null())
      s.groups.fixed_size = f->get<int>();
    s.groups.member_radius_m = x->value("member_radius_m", d.groups.member_radius_m);
    s.groups.spatial = x->value("spatial", d.groups.spatial);
  }
  SimConfig& c = s.sim;
  if (auto x = j.find("mobility"); x != j.end()) {
    c.mobile = x->value("enabled", d.sim.mobile);
    c.speed_min_mps = x->value("speed_min_mps", d.sim.speed_min_mps);
    c.speed_max_mps = x->value("speed_max_mps", d.sim.speed_max_mps);
    c.pause_s = x->value("pause_s", d.sim.pause_s);
    c.mobility_step_s = x->value("step_ms", d.sim.mobility_step_s * 1e3) / 1e3;
  }
  if (auto x = j.find("sim"); x != j.end()) {
    c.duration_s = x->value("duration_s", d.sim.duration_s);
    c.subframe_s = x->value("subframe_ms", d.sim.subframe_s * 1e3) / 1e3;
    c.interval_s = x->value("t_interval_ms", d.sim.interval_s * 1e3) / 1e3;
    c.history_window = x->value("history_window", d.sim.history_window);
    c.alpha = x->value("alpha", d.sim.alpha);
    c.closed_loop_history = x->value("closed_loop_history", d.sim.closed_loop_history);
    c.pattern_length = x->value("pattern_length", d.sim.pattern_length);
    c.efficiency_mode = parse_mode(x->value("efficiency_mode", mode_name(d.sim.efficiency_mode)));
    c.raster_resolution_m = x->value("raster_resolution_m", d.sim.raster_resolution_m);
    c.share_mc_trials = x->value("share_mc_trials", d.sim.share_mc_trials);
    c.share_method = parse_share_method(x->value("share_method", share_method_name(d.sim.share_method)));
    c.share_per_state = parse_coverage(x->value("share_coverage", coverage_name(d.sim.share_per_state)));
    c.jfi_window_s = x->value("jfi_window_s", d.sim.jfi_window_s);
    c.batches = x->value("batches", d.sim.batches);
    c.series_step_s = x->value("series_step_s", d.sim.series_step_s);
    s.max_states.reset();
    if (auto m = x->find("max_states"); m != x->end() && !m->is_null())
      s.max_states = m->get<std::size_t>();
  }
  s.policies = j.value("policies", d.policies);
  s.seeds = j.value("seeds", d.seeds);
  if (auto x = j.find("validation"); x != j.end()) {
    s.validation.state_ids = x->value("state_ids", d.validation.state_ids);
    s.validation.n_states = x->value("n_states", d.validation.n_states);
    s.validation.sizes = x->value("sizes", d.validation.sizes);
    s.validation.duration_s = x->value("duration_s", d.validation.duration_s);
  }
}

std::filesystem::path Scenario::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

void Scenario::validate() const {
  if (!(world.width > 0.0 && world.height > 0.0))
    throw std::domain_error("world dimensions must be positive");
  if (deployment.type == "grid") {
    if (deployment.n_stations < 1 || !(deployment.isd_m > 0.0))
      throw std::domain_error("grid deployment needs n_stations >= 1 and isd_m > 0");
  } else if (deployment.type == "file") {
    if (!std::filesystem::exists(resolve(deployment.path)))
      throw std::domain_error("deployment file not found: " + resolve(deployment.path).string());
  } else {
    throw std::domain_error("deployment.type must be 'grid' or 'file'");
  }
  if (radio.mcs != "default" && !std::filesystem::exists(resolve(radio.mcs)))
    throw std::domain_error("MCS table not found: " + resolve(radio.mcs).string());
  if (!(radio.k_sym_per_s > 0.0))
    throw std::domain_error("k_sym_per_s must be positive");
  if (groups.count < 1)
    throw std::domain_error("groups.count must be >= 1");
  if (groups.size_min < 1 || groups.size_max < groups.size_min)
    throw std::domain_error("group sizes must satisfy 1 <= size_min <= size_max");
  if (groups.fixed_size && *groups.fixed_size < 1)
    throw std::domain_error("groups.fixed_size must be >= 1");
  if (!(groups.member_radius_m >= 0.0))
    throw std::domain_error("groups.member_radius_m must be >= 0");
  if (!is_builtin_spatial(groups.spatial) && !std::filesystem::exists(resolve(groups.spatial)))
    throw std::domain_error("spatial raster not found: " + resolve(groups.spatial).string());
  if (policies.empty())
    throw std::domain_error("policy list is empty");
  for (const auto& p : policies)
    Policy::parse(p);
  if (seeds.empty())
    throw std::domain_error("seed list is empty");
  for (int u : validation.sizes)
    if (u < 1)
      throw std::domain_error("validation sizes must be >= 1");
  sim.validate();
}

Network Scenario::network() const {
  Network net;
  net.deployment = deployment.type == "file"
                       ? Deployment::load_csv(resolve(deployment.path).string(), world)
                       : generate_grid_deployment(deployment.n_stations, deployment.isd_m,
                                                  deployment.power_dbm, world);
  net.pathloss = PathlossModel{radio.pathloss_ref_db, radio.pathloss_ref_distance_m,
                               radio.pathloss_exponent, radio.min_distance_m};
  net.pathloss.validate();
  net.noise_var_w = dbm_to_watt(radio.noise_dbm);
  net.k_sym = radio.k_sym_per_s;
  net.mcs = radio.mcs == "default" ? McsTable::cqi_default()
                                   : McsTable::load_csv(resolve(radio.mcs).string());
  return net;
}

Snapshot place_groups(const World& world, const GroupSpec& spec, const SpatialDistribution* where,
                      std::uint64_t seed) {
  // Separate streams so centroids do not move when sizes or radii change.
  auto pos_rng = make_rng(seed, 0x63656e74ull);
  auto size_rng = make_rng(seed, 0x73697a65ull);
  auto member_rng = make_rng(seed, 0x6d656d62ull);
  std::uniform_int_distribution<int> size_dist(spec.size_min, spec.size_max);
  std::uniform_real_distribution<double> ux(0.0, world.width), uy(0.0, world.height);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  std::discrete_distribution<std::size_t> cell;
  if (where)
    cell = std::discrete_distribution<std::size_t>(where->mass().data(),
                                                   where->mass().data() + where->mass().size());
  Snapshot snap;
  snap.world = world;
  for (int c = 0; c < spec.count; ++c) {
    Group g;
    if (!where) {
      g.centroid = Point(ux(pos_rng), uy(pos_rng));
    } else {
      const Point centre = where->points()[cell(pos_rng)];
      const double r = where->resolution();
      g.centroid = world.clamp(centre + Point(jitter(pos_rng) * r, jitter(pos_rng) * r));
    }
    const int drawn = size_dist(size_rng);
    const int u = spec.fixed_size ? *spec.fixed_size : drawn;
    g.member_offsets = random_member_offsets(u, spec.member_radius_m, member_rng);
    snap.groups.push_back(std::move(g));
  }
  snap.validate();
  return snap;
}

Snapshot Scenario::snapshot(std::uint64_t seed) const {
  if (groups.spatial == "uniform")
    return place_groups(world, groups, nullptr, seed);
  const std::string spec =
      is_builtin_spatial(groups.spatial) ? groups.spatial : resolve(groups.spatial).string();
  const auto dist = SpatialDistribution::parse(spec, world, sim.raster_resolution_m);
  return place_groups(world, groups, &dist, seed);
}

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config '" + path.string() + "': " + e.what());
  }
  Scenario s = j.get<Scenario>();
  s.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  s.validate();
  return s;
}

}  // namespace absf
