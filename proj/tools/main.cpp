#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "fmmlab/experiment.hpp"

namespace {

using fmmlab::experiment::Config;

struct RawOptions {
  std::string dist = "sphere";
  std::string scheme = "hybrid-orb";
  std::string protocol = "hsdx";
  double check_tol = -1.0;
};

void add_common_flags(CLI::App* cmd, Config& cfg, RawOptions& raw) {
  cmd->add_option("--n", cfg.n, "particle count")->envname("FMMLAB_N");
  cmd->add_option("--dist", raw.dist, "distribution: cube|sphere|ball")->envname("FMMLAB_DIST");
  cmd->add_option("--seed", cfg.seed, "RNG seed")->envname("FMMLAB_SEED");
  cmd->add_option("--ranks", cfg.ranks, "simulated rank count")->envname("FMMLAB_RANKS");
  cmd->add_option("--scheme", raw.scheme, "partitioning: hot-morton|hot-hilbert|orb|hybrid-orb")
      ->envname("FMMLAB_SCHEME");
  cmd->add_option("--protocol", raw.protocol, "exchange: bulk|granular|hypercube|nbx|hsdx")
      ->envname("FMMLAB_PROTOCOL");
  cmd->add_option("--grain", cfg.grain, "cells per message for the granular protocol")
      ->envname("FMMLAB_GRAIN");
  cmd->add_option("--order", cfg.order, "expansion order p")->envname("FMMLAB_ORDER");
  cmd->add_option("--theta", cfg.theta, "multipole acceptance parameter")->envname("FMMLAB_THETA");
  cmd->add_option("--leaf", cfg.n_leaf, "leaf capacity")->envname("FMMLAB_LEAF");
  cmd->add_option("--epsilon", cfg.epsilon, "adjacency tolerance (<=0: 1e-9 x domain diagonal)")
      ->envname("FMMLAB_EPSILON");
  cmd->add_option("--alpha", cfg.cost.alpha, "cost per message")->envname("FMMLAB_ALPHA");
  cmd->add_option("--beta", cfg.cost.beta, "cost per byte")->envname("FMMLAB_BETA");
  cmd->add_option("--eager-threshold", cfg.cost.eager_threshold,
                  "bytes above which a message is rendezvous-class")
      ->envname("FMMLAB_EAGER_THRESHOLD");
  cmd->add_option("--rvz-penalty", cfg.cost.rendezvous_penalty,
                  "extra cost per rendezvous message")
      ->envname("FMMLAB_RVZ_PENALTY");
  cmd->add_option("--oracle-cap", cfg.oracle_cap,
                  "largest n checked against the full direct sum")
      ->envname("FMMLAB_ORACLE_CAP");
  cmd->add_flag("--forces", cfg.forces, "also accumulate force vectors");
  cmd->add_option("--out", cfg.out, "output path base for CSV files")->envname("FMMLAB_OUT");
}

void resolve(Config& cfg, const RawOptions& raw) {
  cfg.dist = fmmlab::space::parse_dist(raw.dist);
  cfg.scheme = fmmlab::partition::parse_scheme(raw.scheme);
  cfg.protocol = fmmlab::protocols::parse_protocol(raw.protocol);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fmmlab: partitioning and tree-exchange experiments on a simulated network"};
  app.require_subcommand(1);

  Config cfg;
  RawOptions raw;
  std::string recipe_name;

  auto* solve = app.add_subcommand("solve", "run the full pipeline and verify against direct summation");
  add_common_flags(solve, cfg, raw);
  solve->add_option("--check", raw.check_tol, "exit 3 unless the relative L2 error is at most this");

  auto* recipe = app.add_subcommand("recipe", "run a named experiment recipe");
  recipe->add_option("name", recipe_name, "boundary-weakness|grain-sweep|protocol-faceoff")
      ->required();
  add_common_flags(recipe, cfg, raw);

  auto* report = app.add_subcommand("partition-report", "per-rank partition statistics");
  add_common_flags(report, cfg, raw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    resolve(cfg, raw);
    if (solve->parsed()) {
      auto res = fmmlab::experiment::run_solve(cfg);
      std::size_t mn = 0, mx = 0;
      if (!res.rank_counts.empty()) {
        mn = *std::min_element(res.rank_counts.begin(), res.rank_counts.end());
        mx = *std::max_element(res.rank_counts.begin(), res.rank_counts.end());
      }
      std::printf("rel_l2_error %.6e (over %zu targets)\n", res.rel_l2_error, res.oracle_targets);
      std::printf("messages %llu bytes %llu payload_steps %zu total_steps %zu\n",
                  static_cast<unsigned long long>(res.exchange.total_messages),
                  static_cast<unsigned long long>(res.exchange.total_bytes),
                  res.exchange.payload_steps.size(), res.exchange.steps.size());
      std::printf("modeled_cost %.6g non_neighbor_msgs %llu let_bytes %llu\n",
                  res.exchange.modeled_cost,
                  static_cast<unsigned long long>(res.exchange.non_neighbor_messages),
                  static_cast<unsigned long long>(res.let_bytes));
      std::printf("balance min %zu max %zu\n", mn, mx);
      if (raw.check_tol >= 0.0 && !(res.rel_l2_error <= raw.check_tol)) {
        std::fprintf(stderr, "verification failure: rel_l2_error %.6e > %.6e\n", res.rel_l2_error,
                     raw.check_tol);
        return 3;
      }
    } else if (recipe->parsed()) {
      bool ok = fmmlab::experiment::run_recipe(recipe_name, cfg);
      std::printf("recipe %s: %s\n", recipe_name.c_str(), ok ? "claim holds" : "claim FAILED");
      if (!ok) return 3;
    } else if (report->parsed()) {
      auto rows = fmmlab::experiment::partition_report(cfg);
      std::printf("rank,count,components\n");
      for (const auto& r : rows) std::printf("%d,%zu,%d\n", r.rank, r.count, r.components);
    }
  } catch (const fmmlab::experiment::VerificationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    std::fprintf(stderr, "--- config ---\n%s", cfg.echo().c_str());
    return 2;
  }
  return 0;
}
