#pragma once

#include <array>
#include <vector>

#include "fmmlab/particle.hpp"
#include "fmmlab/sfc.hpp"

namespace fmmlab::core {

struct TraversalConfig {
  double theta = 0.4;  // opening parameter, 0 < theta < 1
  int n_leaf = 64;
  int p = 4;  // expansion order
};

void validate(const TraversalConfig& cfg);

/// Octree node. The stored box is squeezed to the tight hull of the particles in
/// range; center and radius derive from the squeezed box, not the octant grid.
struct Cell {
  space::SfcKey key;  // path key within the tree's build bounds
  Box3 box;
  Vec3 center;
  double radius = 0.0;
  int parent = -1;
  std::array<int, 8> child{-1, -1, -1, -1, -1, -1, -1, -1};
  int nchild = 0;
  std::size_t first = 0;  // particle range [first, first + count)
  std::size_t count = 0;
  std::vector<double> M;
  std::vector<double> L;

  bool is_leaf() const { return nchild == 0; }
};

struct Tree {
  std::vector<Cell> cells;  // parent stored before children; cells[0] is the root
  Particles particles;      // reordered so every cell's range is contiguous
  Box3 build_bounds;        // octant grid the tree was subdivided on
  int max_depth = 0;

  Cell& root() { return cells.front(); }
  const Cell& root() const { return cells.front(); }
};

/// Subdivide bounds until cells hold at most n_leaf particles (depth-capped at
/// level 21, where a leaf may exceed n_leaf), then squeeze every cell box to the
/// tight hull of its particles.
Tree build_tree(Particles particles, const Box3& bounds, const TraversalConfig& cfg);

/// P2M at the leaves, M2M bottom-up. Fills every cell's M (length = number of
/// monomials of total degree < p).
void upward_pass(Tree& tree, const TraversalConfig& cfg);

}  // namespace fmmlab::core
