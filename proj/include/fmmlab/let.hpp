#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fmmlab/traversal.hpp"
#include "fmmlab/tree.hpp"

namespace fmmlab::let {

/// One cell of an essential subtree, as shipped to a remote rank. Cut cells
/// carry only the multipole (has_children and leaf_payload both false); near
/// leaves additionally carry their particles so the receiver never has to ask
/// back. Streams are ordered parent-before-child per origin.
struct CellMsg {
  int origin = -1;
  space::SfcKey key;
  Vec3 center;
  double radius = 0.0;
  Box3 box;
  std::vector<double> M;
  bool has_children = false;
  bool leaf_payload = false;
  std::vector<Particle> particles;

  std::size_t wire_size() const;
  bool operator==(const CellMsg&) const = default;
};

/// Wire layout: header (origin:4, key:8, level:1, flags:1), geometry
/// (center 3 + radius 1 + box 6 doubles), coefficients, then an optional
/// particle block (count:4, 4 doubles each). Size depends only on the
/// coefficient count and the payload count.
std::size_t wire_size(int ncoef, std::size_t payload_count);
void serialize(const CellMsg& msg, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> serialize(std::span<const CellMsg> msgs);
CellMsg parse_cell(std::span<const std::uint8_t> buf, std::size_t& offset, int ncoef);
std::vector<CellMsg> parse_cells(std::span<const std::uint8_t> buf, int ncoef);

/// Walk the local tree top-down and keep exactly what a traversal running inside
/// remote_bounds can need. A cell whose multipole is admissible for every point
/// of the remote box is cut there; leaves that stay near go out with particles.
std::vector<CellMsg> extract_essential(const core::Tree& tree, int origin,
                                       const Box3& remote_bounds,
                                       const core::TraversalConfig& cfg);

/// A remote subtree reassembled from its message stream.
struct GraftedTree {
  int origin = -1;
  core::Tree tree;
};

/// The local tree plus the grafted remote roots, traversed as a source forest.
struct LocalEssentialTree {
  const core::Tree* local = nullptr;
  std::vector<GraftedTree> remote;

  std::vector<const core::Tree*> source_trees() const;
};

/// Rebuild one origin's subtree; throws if a cell arrives before its parent.
core::Tree assemble_subtree(std::span<const CellMsg> msgs, int p);

struct IncomingGroup {
  int origin = -1;
  std::vector<CellMsg> cells;
};

LocalEssentialTree graft(const core::Tree& local, std::span<const IncomingGroup> groups, int p);

}  // namespace fmmlab::let
