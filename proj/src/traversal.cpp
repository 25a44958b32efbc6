#include "fmmlab/traversal.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>

namespace fmmlab::core {

InteractionLists build_interactions(const Tree& targets, std::span<const Tree* const> sources,
                                    const TraversalConfig& cfg) {
  InteractionLists lists;
  lists.m2l.resize(targets.cells.size());
  lists.p2p.resize(targets.cells.size());
  lists.m2p.resize(targets.cells.size());

  struct Pair {
    int t;
    SourceRef s;
  };
  std::vector<Pair> stack;
  for (const Tree* src : sources) stack.push_back({0, {src, 0}});

  while (!stack.empty()) {
    auto [t, s] = stack.back();
    stack.pop_back();
    const Cell& tc = targets.cells[static_cast<std::size_t>(t)];
    const Cell& sc = s.tree->cells[static_cast<std::size_t>(s.cell)];

    double d = dist(tc.center, sc.center);
    if (d > 0.0 && tc.radius + sc.radius < cfg.theta * d) {
      lists.m2l[static_cast<std::size_t>(t)].push_back(s);
      continue;
    }
    // A pruned remote cell has neither children nor particles; the descent has
    // to continue on the target side, down to per-particle evaluation.
    bool s_unopenable = sc.is_leaf() && sc.count == 0;
    if (s_unopenable && tc.is_leaf()) {
      lists.m2p[static_cast<std::size_t>(t)].push_back(s);
      continue;
    }
    if (tc.is_leaf() && sc.is_leaf()) {
      lists.p2p[static_cast<std::size_t>(t)].push_back(s);
      continue;
    }
    bool split_source = !s_unopenable && !sc.is_leaf() && (tc.is_leaf() || sc.radius >= tc.radius);
    if (split_source) {
      for (int k = sc.nchild - 1; k >= 0; --k)
        stack.push_back({t, {s.tree, sc.child[static_cast<std::size_t>(k)]}});
    } else {
      for (int k = tc.nchild - 1; k >= 0; --k)
        stack.push_back({tc.child[static_cast<std::size_t>(k)], s});
    }
  }
  return lists;
}

namespace {

void downward(Tree& targets, const MonomialBasis& basis, int idx, bool with_force,
              std::uint64_t& l2p_particles) {
  Cell& cell = targets.cells[static_cast<std::size_t>(idx)];
  if (cell.is_leaf()) {
    for (std::size_t i = cell.first; i < cell.first + cell.count; ++i)
      l2p(basis, cell.L, cell.center, targets.particles[i], with_force);
    l2p_particles += cell.count;
    return;
  }
  for (int k = 0; k < cell.nchild; ++k) {
    int ch = cell.child[static_cast<std::size_t>(k)];
    Cell& child = targets.cells[static_cast<std::size_t>(ch)];
    l2l(basis, cell.L, cell.center, child.center, child.L);
    downward(targets, basis, ch, with_force, l2p_particles);
  }
}

}  // namespace

EvalStats evaluate(Tree& targets, std::span<const Tree* const> sources,
                   const TraversalConfig& cfg, Parallel par, bool with_force) {
  validate(cfg);
  MonomialBasis basis(cfg.p);
  const auto ncoef = static_cast<std::size_t>(basis.size());
  for (const Tree* src : sources)
    if (src->cells.empty() || src->root().M.size() != ncoef)
      throw std::invalid_argument("fmmcore: source tree lacks multipoles for order p");

  for (auto& cell : targets.cells) cell.L.assign(ncoef, 0.0);

  InteractionLists lists = build_interactions(targets, sources, cfg);

  EvalStats stats;
  std::atomic<std::uint64_t> coincident{0};
  const auto ncells = static_cast<std::int64_t>(targets.cells.size());
#pragma omp parallel for schedule(dynamic, 8) if (par == Parallel::OpenMP)
  for (std::int64_t c = 0; c < ncells; ++c) {
    Cell& tc = targets.cells[static_cast<std::size_t>(c)];
    for (const SourceRef& s : lists.m2l[static_cast<std::size_t>(c)]) {
      const Cell& sc = s.tree->cells[static_cast<std::size_t>(s.cell)];
      m2l(basis, sc.M, sc.center, tc.center, tc.L);
    }
    std::span<Particle> tspan(targets.particles.data() + tc.first, tc.count);
    if (!lists.m2p[static_cast<std::size_t>(c)].empty()) {
      // Local expansion of order p about the particle itself: entry 0 is the
      // potential, the first-degree entries are its gradient.
      std::vector<double> point_L(ncoef);
      int ix = basis.index(1, 0, 0), iy = basis.index(0, 1, 0), iz = basis.index(0, 0, 1);
      for (const SourceRef& s : lists.m2p[static_cast<std::size_t>(c)]) {
        const Cell& sc = s.tree->cells[static_cast<std::size_t>(s.cell)];
        for (auto& part : tspan) {
          std::fill(point_L.begin(), point_L.end(), 0.0);
          m2l(basis, sc.M, sc.center, part.pos, point_L);
          part.phi += point_L[0];
          if (with_force && ix >= 0)
            part.force += Vec3{point_L[static_cast<std::size_t>(ix)],
                               point_L[static_cast<std::size_t>(iy)],
                               point_L[static_cast<std::size_t>(iz)]} *
                          -1.0;
        }
      }
    }
    for (const SourceRef& s : lists.p2p[static_cast<std::size_t>(c)]) {
      const Cell& sc = s.tree->cells[static_cast<std::size_t>(s.cell)];
      bool same = s.tree == &targets && s.cell == static_cast<int>(c);
      std::span<const Particle> sspan(s.tree->particles.data() + sc.first, sc.count);
      coincident.fetch_add(p2p(tspan, sspan, same, with_force), std::memory_order_relaxed);
    }
  }

  std::uint64_t l2p_particles = 0;
  downward(targets, basis, 0, with_force, l2p_particles);

  for (const auto& l : lists.m2l) stats.m2l_pairs += l.size();
  for (const auto& l : lists.p2p) stats.p2p_pairs += l.size();
  for (const auto& l : lists.m2p) stats.m2p_pairs += l.size();
  stats.coincident_skips = coincident.load();
  return stats;
}

EvalStats evaluate(Tree& tree, const TraversalConfig& cfg, Parallel par, bool with_force) {
  const Tree* self = &tree;
  return evaluate(tree, std::span<const Tree* const>(&self, 1), cfg, par, with_force);
}

}  // namespace fmmlab::core
