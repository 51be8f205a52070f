#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "akrel/driver.hpp"
#include "akrel/io.hpp"

namespace akrel::cli {

/// Flag values that override the configuration document.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  std::optional<std::string> policy;
  std::optional<std::size_t> n_para;
  std::optional<std::size_t> max_iter;
};

inline RunConfig apply(RunConfig cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.strategy) cfg.strategy = parse_strategy(*o.strategy);
  if (o.policy) cfg.policy.kind = parse_policy(*o.policy);
  if (o.n_para) cfg.n_para = *o.n_para;
  if (o.max_iter) cfg.max_iterations = *o.max_iter;
  cfg.validate();
  return cfg;
}

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxIter = 2;

inline void ensure_dir(const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw Error("cannot create output directory '" + out.string() + "': " + ec.message());
}

/// Runs one configuration and writes history.csv and summary.json.
inline int cmd_run(const std::filesystem::path& config, const Overrides& ov, const std::filesystem::path& out,
                   std::ostream& err = std::cerr) {
  try {
    const RunConfig cfg = apply(load_config(config), ov);
    ensure_dir(out);
    const RunReport rep = run(cfg);
    std::ostringstream hist;
    write_history(hist, rep);
    write_text(out / "history.csv", hist.str());
    write_text(out / "summary.json", summary_json(cfg, rep).dump(2) + "\n");
    for (const auto& w : rep.warnings) err << "warning: " << w << '\n';
    return rep.cause == StopCause::max_iterations ? kExitMaxIter : kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

inline std::vector<StrategyKind> parse_strategy_list(const std::string& s) {
  std::vector<StrategyKind> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_strategy(item));
  if (out.empty()) throw InvalidArgument("empty strategy list");
  return out;
}

/// Runs each strategy with paired replication seeds; writes comparison.csv.
inline int cmd_compare(const std::filesystem::path& config, const std::vector<std::string>& strategies,
                       std::size_t replications, const Overrides& ov, const std::filesystem::path& out,
                       std::ostream& err = std::cerr) {
  try {
    const RunConfig cfg = apply(load_config(config), ov);
    std::vector<StrategyKind> ks;
    for (const auto& s : strategies) {
      const auto part = parse_strategy_list(s);
      ks.insert(ks.end(), part.begin(), part.end());
    }
    if (ks.empty()) ks.push_back(cfg.strategy);
    ensure_dir(out);
    const auto rows = compare(cfg, ks, replications, false,
                              [&](StrategyKind k, std::size_t r, const RunReport*, const std::string& e) {
                                if (!e.empty())
                                  err << "warning: " << to_string(k) << " replication " << r << " failed: " << e << '\n';
                              });
    std::ostringstream os;
    write_comparison(os, rows);
    write_text(out / "comparison.csv", os.str());
    for (const auto& r : rows)
      if (r.runs == 0) return kExitError;
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

/// Runs the configuration and writes the final surrogate on a grid.
inline int cmd_grid(const std::filesystem::path& config, std::size_t resolution, const Overrides& ov,
                    const std::filesystem::path& out, std::ostream& err = std::cerr) {
  try {
    const RunConfig cfg = apply(load_config(config), ov);
    if (cfg.limit_state.dim() != 2) throw InvalidArgument("grid output needs a 2-dimensional limit state");
    std::vector<double> lo = cfg.grid_lower, hi = cfg.grid_upper;
    const RandomVariableSpec spec = cfg.rv_spec();
    if (lo.empty())
      for (std::size_t i = 0; i < 2; ++i) lo.push_back(spec[i].mean - 5.0 * spec[i].std);
    if (hi.empty())
      for (std::size_t i = 0; i < 2; ++i) hi.push_back(spec[i].mean + 5.0 * spec[i].std);
    ensure_dir(out);
    const RunReport rep = run(cfg);
    std::ostringstream os;
    write_grid(os, grid_dump(*rep.model, lo, hi, resolution));
    write_text(out / "grid.csv", os.str());
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

/// Command-line entry point.
inline int main(int argc, char** argv) {
  CLI::App app{"Active-learning Kriging reliability analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "akrel 0.1.0");

  std::string config;
  std::string out = ".";
  Overrides ov;
  std::size_t replications = 1;
  std::vector<std::string> strategies;
  std::size_t resolution = 100;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON run configuration")->required();
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", ov.seed, "Override the run seed");
    sub->add_option("--strategy", ov.strategy, "Learning strategy (u, eff, h, lif, reif, reif2, fneif, opt_nco, opt_wco)");
    sub->add_option("--policy", ov.policy, "Batch fantasy policy (mmse, mape, mmae)");
    sub->add_option("--n-para", ov.n_para, "Points enriched per iteration")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", ov.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  };
  CLI::App* run_cmd = app.add_subcommand("run", "Run one adaptive analysis");
  common(run_cmd);
  CLI::App* cmp_cmd = app.add_subcommand("compare", "Compare strategies over replications");
  common(cmp_cmd);
  cmp_cmd->add_option("--replications", replications, "Replications per strategy")->check(CLI::PositiveNumber);
  cmp_cmd->add_option("--strategies", strategies, "Comma separated strategies (default: the configured one)")
      ->delimiter(',');
  CLI::App* grid_cmd = app.add_subcommand("grid", "Run, then write the surrogate on a 2-D grid");
  common(grid_cmd);
  grid_cmd->add_option("--resolution", resolution, "Grid points per axis")->check(CLI::Range(2, 100000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }
  if (*run_cmd) return cmd_run(config, ov, out);
  if (*cmp_cmd) return cmd_compare(config, strategies, replications, ov, out);
  return cmd_grid(config, resolution, ov, out);
}

}  // namespace akrel::cli
