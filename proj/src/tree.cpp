#include "fmmlab/tree.hpp"

#include <algorithm>
#include <stdexcept>

#include "fmmlab/kernels.hpp"

namespace fmmlab::core {

void validate(const TraversalConfig& cfg) {
  if (!(cfg.theta > 0.0) || !(cfg.theta < 1.0))
    throw std::invalid_argument("fmmcore: theta must be in (0, 1)");
  if (cfg.n_leaf < 1) throw std::invalid_argument("fmmcore: n_leaf must be >= 1");
  if (cfg.p < 1) throw std::invalid_argument("fmmcore: expansion order must be >= 1");
}

namespace {

struct Builder {
  Tree& tree;
  int n_leaf;
  Particles scratch;

  // Returns the new cell's index. Children are appended after their parent, so a
  // reverse sweep visits children before parents.
  int build(const Box3& grid_box, std::size_t first, std::size_t count, int level,
            std::uint64_t key, int parent) {
    int idx = static_cast<int>(tree.cells.size());
    tree.cells.emplace_back();
    {
      Cell& c = tree.cells.back();
      c.key = {key, level, space::CurveKind::Morton};
      c.parent = parent;
      c.first = first;
      c.count = count;
    }
    tree.max_depth = std::max(tree.max_depth, level);
    if (count <= static_cast<std::size_t>(n_leaf) || level == space::kMaxLevel) return idx;

    Vec3 c = grid_box.center();
    std::array<std::size_t, 8> bucket_count{};
    auto octant = [&c](const Vec3& p) {
      return (p.x >= c.x ? 1 : 0) | (p.y >= c.y ? 2 : 0) | (p.z >= c.z ? 4 : 0);
    };
    for (std::size_t i = first; i < first + count; ++i)
      ++bucket_count[static_cast<std::size_t>(octant(tree.particles[i].pos))];

    std::array<std::size_t, 8> offset{};
    std::size_t acc = first;
    for (int o = 0; o < 8; ++o) {
      offset[static_cast<std::size_t>(o)] = acc;
      acc += bucket_count[static_cast<std::size_t>(o)];
    }
    // Stable scatter through scratch keeps the build order-deterministic.
    scratch.assign(tree.particles.begin() + static_cast<std::ptrdiff_t>(first),
                   tree.particles.begin() + static_cast<std::ptrdiff_t>(first + count));
    std::array<std::size_t, 8> cursor = offset;
    for (const auto& part : scratch)
      tree.particles[cursor[static_cast<std::size_t>(octant(part.pos))]++] = part;

    for (int o = 0; o < 8; ++o) {
      std::size_t cnt = bucket_count[static_cast<std::size_t>(o)];
      if (cnt == 0) continue;
      Box3 child_box;
      for (std::size_t d = 0; d < 3; ++d) {
        bool hi = (o >> d) & 1;
        child_box.min[d] = hi ? c[d] : grid_box.min[d];
        child_box.max[d] = hi ? grid_box.max[d] : c[d];
      }
      int child = build(child_box, offset[static_cast<std::size_t>(o)], cnt, level + 1,
                        (key << 3) | static_cast<std::uint64_t>(o), idx);
      Cell& parent_cell = tree.cells[static_cast<std::size_t>(idx)];
      parent_cell.child[static_cast<std::size_t>(parent_cell.nchild++)] = child;
    }
    return idx;
  }
};

}  // namespace

Tree build_tree(Particles particles, const Box3& bounds, const TraversalConfig& cfg) {
  validate(cfg);
  if (particles.empty()) throw std::invalid_argument("fmmcore: cannot build a tree of 0 particles");
  for (const auto& p : particles)
    if (!bounds.contains(p.pos))
      throw std::invalid_argument("fmmcore: build bounds do not contain all particles");

  Tree tree;
  tree.particles = std::move(particles);
  tree.build_bounds = bounds;
  Builder b{tree, cfg.n_leaf, {}};
  b.build(bounds, 0, tree.particles.size(), 0, 0, -1);

  // Squeeze every box to the tight hull of its particles; children come after
  // parents, so the reverse sweep can take unions of finished child boxes.
  for (auto it = tree.cells.rbegin(); it != tree.cells.rend(); ++it) {
    Cell& cell = *it;
    if (cell.is_leaf()) {
      cell.box = Box3{};
      for (std::size_t i = cell.first; i < cell.first + cell.count; ++i)
        cell.box.expand(tree.particles[i].pos);
    } else {
      cell.box = Box3{};
      for (int k = 0; k < cell.nchild; ++k)
        cell.box.expand(tree.cells[static_cast<std::size_t>(cell.child[static_cast<std::size_t>(k)])].box);
    }
    cell.center = cell.box.center();
    cell.radius = cell.box.radius();
  }
  return tree;
}

void upward_pass(Tree& tree, const TraversalConfig& cfg) {
  validate(cfg);
  MonomialBasis basis(cfg.p);
  const auto ncoef = static_cast<std::size_t>(basis.size());
  for (auto it = tree.cells.rbegin(); it != tree.cells.rend(); ++it) {
    Cell& cell = *it;
    cell.M.assign(ncoef, 0.0);
    if (cell.is_leaf()) {
      p2m(basis,
          std::span<const Particle>(tree.particles.data() + cell.first, cell.count),
          cell.center, cell.M);
    } else {
      for (int k = 0; k < cell.nchild; ++k) {
        const Cell& ch = tree.cells[static_cast<std::size_t>(cell.child[static_cast<std::size_t>(k)])];
        m2m(basis, ch.M, ch.center, cell.center, cell.M);
      }
    }
  }
}

}  // namespace fmmlab::core
