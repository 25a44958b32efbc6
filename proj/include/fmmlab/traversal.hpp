#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fmmlab/kernels.hpp"
#include "fmmlab/tree.hpp"

namespace fmmlab::core {

struct SourceRef {
  const Tree* tree = nullptr;
  int cell = -1;
  bool operator==(const SourceRef&) const = default;
};

/// Per-target-cell far (M2L) and near (P2P) partners from the dual traversal.
/// A pair is far when (rA + rB) < theta * dist(centerA, centerB); otherwise the
/// cell with the larger radius is opened (source on ties, leaves never).
struct InteractionLists {
  std::vector<std::vector<SourceRef>> m2l;
  std::vector<std::vector<SourceRef>> p2p;
  /// Leaf targets paired with a pruned remote cell whose dual MAC failed. The
  /// multipole is evaluated per particle instead: extraction only prunes cells
  /// whose point-target MAC holds everywhere in the receiving partition, so
  /// these stay admissible.
  std::vector<std::vector<SourceRef>> m2p;
};

InteractionLists build_interactions(const Tree& targets, std::span<const Tree* const> sources,
                                    const TraversalConfig& cfg);

struct EvalStats {
  std::uint64_t m2l_pairs = 0;
  std::uint64_t p2p_pairs = 0;         // cell pairs
  std::uint64_t m2p_pairs = 0;         // leaf-vs-pruned-remote-cell pairs
  std::uint64_t coincident_skips = 0;  // distinct particles at zero distance
};

/// Dual-tree evaluation of the targets against a source forest (the local tree
/// and any grafted remote trees). Accumulates into phi/force; M must be filled
/// on every source tree. Parallelism is over target cells, each written by one
/// context, so results are identical for any thread count.
EvalStats evaluate(Tree& targets, std::span<const Tree* const> sources,
                   const TraversalConfig& cfg, Parallel par = Parallel::Serial,
                   bool with_force = false);

/// Convenience: self-evaluation of one tree.
EvalStats evaluate(Tree& tree, const TraversalConfig& cfg, Parallel par = Parallel::Serial,
                   bool with_force = false);

}  // namespace fmmlab::core
