// absf <analyze|optimize|simulate|validate> --config FILE --out DIR [--seed N]... [--policy NAME]...
//
// Log verbosity comes from SPDLOG_LEVEL (e.g. SPDLOG_LEVEL=debug).

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/spdlog.h>

#include "absf/suite.hpp"

namespace {

struct Args {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> policies;
};

void add_common(CLI::App* cmd, Args& args) {
  cmd->add_option("--config", args.config, "scenario JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "output directory")->required();
  cmd->add_option("--seed", args.seeds, "override the scenario seeds (repeatable)");
  cmd->add_option("--policy", args.policies, "override the scenario policies (repeatable)");
}

absf::Scenario load(const Args& args) {
  absf::Scenario s = absf::Scenario::load(args.config);
  if (!args.seeds.empty())
    s.seeds = args.seeds;
  if (!args.policies.empty())
    s.policies = args.policies;
  s.validate();
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::cfg::load_env_levels();
  CLI::App app{"Almost-blank-subframe planning with relay groups"};
  app.require_subcommand(1);
  Args args;
  auto* analyze = app.add_subcommand("analyze", "per-state throughput tables and relay gain");
  auto* optimize = app.add_subcommand("optimize", "asymptotic PF probabilities and ABS pattern");
  auto* simulate = app.add_subcommand("simulate", "run every (policy, seed) pair");
  auto* validate = app.add_subcommand("validate", "model vs simulation per ABS state");
  for (auto* cmd : {analyze, optimize, simulate, validate})
    add_common(cmd, args);
  CLI11_PARSE(app, argc, argv);

  try {
    const absf::Scenario scenario = load(args);
    const std::filesystem::path out(args.out);
    std::filesystem::create_directories(out);
    const std::uint64_t seed = scenario.seeds.front();
    if (analyze->parsed()) {
      const auto res = absf::analyze(scenario, out, seed);
      const auto& g = res.relay_gain;
      std::cout << "states: " << res.states.size() << ", relay gain U=" << g.back().group_size
                << " vs U=1: " << 100.0 * (g.back().mean_group_bps / g.front().mean_group_bps - 1.0)
                << "%\n";
    } else if (optimize->parsed()) {
      const auto sol = absf::optimize(scenario, out, seed);
      std::cout << "objective " << sol.objective << ", KKT residual " << sol.kkt_residual << ", "
                << sol.iterations << " iterations\n";
      return sol.converged ? 0 : 2;
    } else if (simulate->parsed()) {
      const auto res = absf::run_suite(scenario, out);
      for (const auto& p : res.pooled)
        std::cout << p.policy << ": " << p.system_throughput.mean << " bit/s ["
                  << p.system_throughput.low << ", " << p.system_throughput.high << "], JFI "
                  << p.jfi.mean << '\n';
      return res.ok() ? 0 : 1;
    } else if (validate->parsed()) {
      const auto rows = absf::validate_model(scenario, out, seed);
      std::size_t inside = 0;
      for (const auto& r : rows)
        inside += r.inside();
      std::cout << inside << " of " << rows.size() << " states inside the simulation CI\n";
      return inside == rows.size() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
