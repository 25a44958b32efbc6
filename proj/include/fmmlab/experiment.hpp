#pragma once

#include <map>
#include <string>
#include <vector>

#include "fmmlab/distribution.hpp"
#include "fmmlab/partition.hpp"
#include "fmmlab/protocols.hpp"

namespace fmmlab::experiment {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::size_t n = 4096;
  space::DistKind dist = space::DistKind::SphereSurface;
  std::uint64_t seed = 1;
  int ranks = 1;
  partition::SchemeKind scheme = partition::SchemeKind::HybridOrb;
  protocols::ProtocolKind protocol = protocols::ProtocolKind::Hsdx;
  std::size_t grain = 64;
  int order = 4;
  double theta = 0.4;
  int n_leaf = 64;
  double epsilon = 0.0;  // <= 0 resolves to 1e-9 x domain diagonal
  simnet::CostModel cost;
  std::size_t oracle_cap = 20000;
  std::size_t oracle_samples = 1000;
  bool forces = false;
  std::string out;

  core::TraversalConfig traversal() const { return {theta, n_leaf, order}; }
  void validate() const;
  std::string echo() const;
};

/// Everything up to (but not including) the network: particles generated,
/// partitioned, local trees built with multipoles, neighbor sets, and the
/// per-pair essential extractions.
struct DistributedSetup {
  Particles particles;  // original order
  Box3 global_bounds;
  double epsilon = 0.0;  // resolved value
  std::vector<partition::Partition> parts;
  std::vector<core::Tree> trees;
  std::vector<protocols::NeighborSet> neighbors;  // empty if adjacency failed and protocol allows
  std::vector<std::vector<std::vector<let::CellMsg>>> outgoing;
  std::uint64_t let_bytes = 0;  // serialized size of all extractions
};

DistributedSetup prepare(const Config& cfg);

struct SolveResult {
  std::vector<double> potentials;  // by particle id
  double rel_l2_error = -1.0;      // vs the direct oracle
  std::size_t oracle_targets = 0;
  std::vector<std::size_t> rank_counts;
  protocols::ExchangeResult exchange;
  std::uint64_t let_bytes = 0;
  std::uint64_t coincident_skips = 0;
};

/// Full pipeline: generate, partition, build, exchange, evaluate, verify
/// against the direct oracle (all targets up to oracle_cap, sampled above).
/// Writes <out>.summary.csv, <out>.steps.csv and <out>.config.txt when out set.
SolveResult run_solve(const Config& cfg);

struct BoundaryWeaknessResult {
  struct Row {
    std::string scheme;
    int rank;
    std::size_t count;
    int components;
  };
  std::vector<Row> rows;
  std::map<std::string, std::uint64_t> let_bytes;  // per scheme
  double linking_length = 0.0;
};

struct GrainSweepRow {
  std::size_t grain;
  std::uint64_t messages;
  std::uint64_t bytes;
  double modeled_cost;
  std::uint64_t overlap_units;
};

struct FaceoffRow {
  std::string protocol;
  std::uint64_t messages;
  std::uint64_t bytes;
  std::size_t payload_steps;
  std::size_t total_steps;
  double modeled_cost;
  std::uint64_t non_neighbor_messages;
};

BoundaryWeaknessResult recipe_boundary_weakness(Config cfg);
std::vector<GrainSweepRow> recipe_grain_sweep(const Config& cfg);
std::vector<FaceoffRow> recipe_protocol_faceoff(const Config& cfg);

/// Dispatch by name (boundary-weakness | grain-sweep | protocol-faceoff),
/// writing the CSV outputs. Returns false if the recipe's comparative claim
/// does not hold on this configuration.
bool run_recipe(const std::string& name, const Config& cfg);

struct PartitionReportRow {
  int rank;
  std::size_t count;
  int components;
  Box3 bounds;
};
std::vector<PartitionReportRow> partition_report(const Config& cfg);

}  // namespace fmmlab::experiment
