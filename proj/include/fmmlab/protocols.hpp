#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fmmlab/let.hpp"
#include "fmmlab/simnet.hpp"

namespace fmmlab::protocols {

enum class ProtocolKind { BulkAlltoall, Granular, Hypercube, Nbx, Hsdx };

struct UnsupportedConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Direct neighbors of a rank: boxes that, inflated by epsilon, intersect in
/// all three dimensions. Symmetric by construction; never contains the owner.
struct NeighborSet {
  int owner = 0;
  std::vector<int> neighbors;
};

std::vector<NeighborSet> build_neighbors(std::span<const Box3> bounds, double epsilon);

/// ceil((two_hop - neighborhood) / (neighborhood - 1)); both counts include the
/// rank itself. The per-step relay budget each direct neighbor gets.
int nb_bound(std::size_t two_hop_incl_self, std::size_t neighborhood_incl_self);

/// BFS relay tree rooted at the owner over the neighbor graph. Every other rank
/// gets exactly one relay (an already-discovered neighbor), chosen with minimum
/// current load, ties to the lowest rank id; newly discovered ranks with the
/// fewest candidate relays are placed first so forced assignments cannot pile up.
struct CommGraph {
  int owner = 0;
  std::vector<int> level;               // per rank; owner is 0
  std::vector<int> relay;               // next hop toward the owner; -1 for the owner
  std::vector<std::vector<int>> levels; // levels[l-1] = ranks at BFS level l
  std::vector<int> load;                // per rank: how many ranks it relays for
  int max_level = 0;
};

CommGraph build_comm_graph(std::span<const NeighborSet> neighbors, int owner);

struct ExchangeInput {
  int ranks = 1;
  int p = 4;
  /// outgoing[src][dst]: essential cells src owes dst (parent-before-child).
  std::vector<std::vector<std::vector<let::CellMsg>>> outgoing;
  std::vector<NeighborSet> neighbors;  // required for Hsdx, used for accounting otherwise
  simnet::CostModel cost;
  std::size_t grain = 64;  // Granular: cells per message
};

struct ExchangeResult {
  std::vector<std::vector<let::IncomingGroup>> received;  // per rank, ordered by origin
  std::vector<simnet::StepMetrics> steps;
  std::vector<int> payload_steps;  // supersteps that carried cell payloads
  std::uint64_t total_messages = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t non_neighbor_messages = 0;
  /// Per rank: max over (superstep, in-edge) of distinct origins relayed to it.
  std::vector<std::uint64_t> max_relay_in;
  std::uint64_t overlap_units = 0;  // Granular: subtree-steps available before the last arrival
  double modeled_cost = 0.0;
};

/// Runs one full LET exchange over the simulated network. Every protocol
/// delivers the same (origin, cells) content to every rank; they differ in
/// routing, message counts, and step structure.
ExchangeResult exchange(ProtocolKind kind, const ExchangeInput& in);

ProtocolKind parse_protocol(const std::string& name);
std::string to_string(ProtocolKind kind);

}  // namespace fmmlab::protocols
