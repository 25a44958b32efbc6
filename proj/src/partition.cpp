#include "fmmlab/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace fmmlab::partition {

namespace {

constexpr int kBins = 512;
constexpr int kMaxIters = 32;

template <typename T>
std::size_t count_below(std::span<const std::vector<T>> lists, T x) {
  std::size_t c = 0;
  for (const auto& l : lists)
    for (T v : l) c += (v < x);
  return c;
}

template <typename T>
SplitterResult<T> pick_best(std::span<const std::vector<T>> lists, std::size_t target,
                            std::size_t tol, std::initializer_list<T> candidates, int iters) {
  SplitterResult<T> best;
  best.imbalance = std::numeric_limits<std::size_t>::max();
  for (T s : candidates) {
    std::size_t c = count_below(lists, s);
    std::size_t imb = c > target ? c - target : target - c;
    if (imb < best.imbalance) best = {s, c, imb, false, iters};
  }
  best.converged = best.imbalance <= tol;
  return best;
}

inline double bin_edge(double lo, double hi, int t, int nbins) {
  return lo + (hi - lo) * (static_cast<double>(t) / nbins);
}
inline std::uint64_t bin_edge(std::uint64_t lo, std::uint64_t hi, int t, int nbins) {
  return lo + (hi - lo) / static_cast<std::uint64_t>(nbins) * static_cast<std::uint64_t>(t);
}
inline double above(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }
inline std::uint64_t above(std::uint64_t x) { return x + 1; }

template <typename T>
SplitterResult<T> find_splitter_impl(std::span<const std::vector<T>> lists, std::size_t target,
                                     std::size_t tol) {
  std::size_t total = 0;
  T lo{}, hi{};
  bool any = false;
  for (const auto& l : lists)
    for (T v : l) {
      if (!any) {
        lo = hi = v;
        any = true;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      ++total;
    }
  if (target > total) throw std::invalid_argument("find_splitter: target exceeds value count");
  if (!any) return {T{}, 0, target, target <= tol, 0};

  // Interval [a, b] known to bracket the splitter; ca = exact count of values < a.
  T a = lo, b = hi;
  std::size_t ca = 0;
  for (int iter = 1; iter <= kMaxIters; ++iter) {
    int nbins = kBins;
    if constexpr (std::is_integral_v<T>) {
      if (b - a < static_cast<T>(kBins)) nbins = static_cast<int>(b - a);
    }
    if (nbins < 1 || !(a < b) || !(a < bin_edge(a, b, 1, nbins)))
      return pick_best(lists, target, tol, {a, b, above(b)}, iter);

    // Only the histogram counts are shared across the per-rank lists.
    std::vector<std::size_t> hist(static_cast<std::size_t>(nbins), 0);
    for (const auto& l : lists)
      for (T v : l) {
        if (v < a || v > b) continue;
        int t;
        if constexpr (std::is_integral_v<T>)
          t = static_cast<int>((v - a) / ((b - a) / static_cast<T>(nbins)));
        else
          t = static_cast<int>(static_cast<double>(v - a) / (b - a) * nbins);
        t = std::clamp(t, 0, nbins - 1);
        ++hist[static_cast<std::size_t>(t)];
      }

    // Largest edge whose cumulative count stays at or below the target.
    std::size_t cum = ca;
    int tstar = 0;
    for (int t = 1; t <= nbins; ++t) {
      cum += hist[static_cast<std::size_t>(t - 1)];
      if (cum <= target && t < nbins) tstar = t;
    }
    T na = bin_edge(a, b, tstar, nbins);
    T nb = bin_edge(a, b, tstar + 1, nbins);
    std::size_t nca = count_below(lists, na);  // exact, guards fp edge effects
    std::size_t imb = nca > target ? nca - target : target - nca;
    if (imb <= tol) return {na, nca, imb, true, iter};
    if (na == a && nb == b) return pick_best(lists, target, tol, {a, b, above(b)}, iter);
    a = na;
    b = nb;
    ca = nca;
  }
  return pick_best(lists, target, tol, {a, b, above(b)}, kMaxIters);
}

// Fair share boundary: total particle count owned by the first r of nranks.
std::size_t fair_prefix(std::size_t n, int nranks, int r) {
  std::size_t q = n / static_cast<std::size_t>(nranks);
  std::size_t rem = n % static_cast<std::size_t>(nranks);
  return q * static_cast<std::size_t>(r) + std::min(rem, static_cast<std::size_t>(r));
}

void orb_recurse(std::span<Particle> span, int rank0, int nranks, std::vector<Partition>& out,
                 std::vector<OrbSplitRecord>* trace) {
  if (nranks == 1) {
    Partition& p = out[static_cast<std::size_t>(rank0)];
    p.rank = rank0;
    p.particles.assign(span.begin(), span.end());
    p.bounds = bounding_box(p.particles);
    return;
  }
  Box3 tight;
  for (const auto& p : span) tight.expand(p.pos);
  int axis = tight.longest_dim();
  if (trace) trace->push_back({axis, tight.extent()});

  int pl = nranks / 2;
  std::size_t nl = fair_prefix(span.size(), nranks, pl);
  auto cmp = [axis](const Particle& a, const Particle& b) {
    if (a.pos[static_cast<std::size_t>(axis)] != b.pos[static_cast<std::size_t>(axis)])
      return a.pos[static_cast<std::size_t>(axis)] < b.pos[static_cast<std::size_t>(axis)];
    return a.id < b.id;
  };
  std::nth_element(span.begin(), span.begin() + static_cast<std::ptrdiff_t>(nl), span.end(), cmp);
  orb_recurse(span.first(nl), rank0, pl, out, trace);
  orb_recurse(span.subspan(nl), rank0 + pl, nranks - pl, out, trace);
}

std::vector<Partition> hot_partition(const Particles& particles, const PartitionScheme& scheme) {
  const std::size_t n = particles.size();
  const int nranks = scheme.ranks;
  double depth = std::log(std::max(1.0, static_cast<double>(n) / scheme.n_leaf)) / std::log(8.0);
  int level = std::clamp(static_cast<int>(std::ceil(depth)) + 2, 1, space::kMaxLevel);
  std::uint64_t side = 1ull << level;

  Box3 box = bounding_box(particles);
  Vec3 ext = box.extent();
  auto curve = scheme.kind == SchemeKind::HotMorton ? space::CurveKind::Morton
                                                    : space::CurveKind::Hilbert;
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t c[3];
    for (std::size_t d = 0; d < 3; ++d) {
      double u = ext[d] > 0.0 ? (particles[i].pos[d] - box.min[d]) / ext[d] : 0.0;
      c[d] = static_cast<std::uint32_t>(
          std::min<std::uint64_t>(side - 1, static_cast<std::uint64_t>(u * static_cast<double>(side))));
    }
    keys[i] = space::encode_key(c[0], c[1], c[2], level, curve).key;
  }

  std::size_t tol = std::max<std::size_t>(1, n / (1000 * static_cast<std::size_t>(nranks)));
  std::vector<std::vector<std::uint64_t>> lists{keys};
  std::vector<std::uint64_t> splitters(static_cast<std::size_t>(nranks) - 1);
  for (int r = 1; r < nranks; ++r) {
    auto res = find_splitter(std::span<const std::vector<std::uint64_t>>(lists),
                             fair_prefix(n, nranks, r), tol);
    splitters[static_cast<std::size_t>(r) - 1] = res.splitter;
  }
  for (std::size_t r = 1; r < splitters.size(); ++r)
    splitters[r] = std::max(splitters[r], splitters[r - 1]);

  std::vector<Partition> parts(static_cast<std::size_t>(nranks));
  for (int r = 0; r < nranks; ++r) parts[static_cast<std::size_t>(r)].rank = r;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::upper_bound(splitters.begin(), splitters.end(), keys[i]);
    auto r = static_cast<std::size_t>(it - splitters.begin());
    parts[r].particles.push_back(particles[i]);
  }
  for (auto& p : parts) {
    if (p.particles.empty())
      throw std::invalid_argument("partition: rank " + std::to_string(p.rank) +
                                  " received no particles (duplicate-heavy keys?)");
    p.bounds = bounding_box(p.particles);
  }
  return parts;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  }
  int find(int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

inline std::uint64_t grid_hash(std::int64_t ix, std::int64_t iy, std::int64_t iz) {
  std::uint64_t h = static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ull;
  h ^= static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4full;
  h ^= static_cast<std::uint64_t>(iz) * 0x165667b19e3779f9ull;
  return h;
}

}  // namespace

SplitterResult<double> find_splitter(std::span<const std::vector<double>> per_rank_values,
                                     std::size_t target, std::size_t tol) {
  return find_splitter_impl(per_rank_values, target, tol);
}

SplitterResult<std::uint64_t> find_splitter(std::span<const std::vector<std::uint64_t>> per_rank_values,
                                            std::size_t target, std::size_t tol) {
  return find_splitter_impl(per_rank_values, target, tol);
}

std::vector<Partition> make_partitions(const Particles& particles, const PartitionScheme& scheme,
                                       std::vector<OrbSplitRecord>* trace) {
  if (scheme.ranks < 1) throw std::invalid_argument("partition: ranks must be >= 1");
  if (particles.size() < static_cast<std::size_t>(scheme.ranks))
    throw std::invalid_argument("partition: need at least one particle per rank");

  if (scheme.kind == SchemeKind::HotMorton || scheme.kind == SchemeKind::HotHilbert)
    return hot_partition(particles, scheme);

  std::vector<Partition> parts(static_cast<std::size_t>(scheme.ranks));
  Particles work = particles;
  orb_recurse(std::span<Particle>(work), 0, scheme.ranks, parts, trace);
  return parts;
}

int connectivity_components(const Particles& particles, double linking_length) {
  if (particles.empty()) return 0;
  if (!(linking_length > 0.0)) throw std::invalid_argument("connectivity: linking length must be positive");

  Box3 box = bounding_box(particles);
  const double cell = linking_length;
  auto index_of = [&](const Vec3& p, std::size_t d) {
    return static_cast<std::int64_t>(std::floor((p[d] - box.min[d]) / cell));
  };
  std::unordered_map<std::uint64_t, std::vector<int>> grid;
  grid.reserve(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i)
    grid[grid_hash(index_of(particles[i].pos, 0), index_of(particles[i].pos, 1),
                   index_of(particles[i].pos, 2))]
        .push_back(static_cast<int>(i));

  UnionFind uf(particles.size());
  const double link2 = linking_length * linking_length;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    std::int64_t ix = index_of(particles[i].pos, 0);
    std::int64_t iy = index_of(particles[i].pos, 1);
    std::int64_t iz = index_of(particles[i].pos, 2);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(grid_hash(ix + dx, iy + dy, iz + dz));
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if (j <= static_cast<int>(i)) continue;
            if ((particles[i].pos - particles[static_cast<std::size_t>(j)].pos).norm2() <= link2)
              uf.unite(static_cast<int>(i), j);
          }
        }
  }
  int components = 0;
  for (std::size_t i = 0; i < particles.size(); ++i)
    if (uf.find(static_cast<int>(i)) == static_cast<int>(i)) ++components;
  return components;
}

double mean_nn_spacing(const Particles& particles, std::size_t max_samples) {
  if (particles.size() < 2) return 0.0;
  Box3 box = bounding_box(particles);
  double diag = std::max(box.diagonal(), std::numeric_limits<double>::min());
  double cell = diag / std::cbrt(static_cast<double>(particles.size()));
  if (!(cell > 0.0)) cell = diag;

  auto idx = [&](const Vec3& p, std::size_t d) {
    return static_cast<std::int64_t>(std::floor((p[d] - box.min[d]) / cell));
  };
  std::unordered_map<std::uint64_t, std::vector<int>> grid;
  grid.reserve(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i)
    grid[grid_hash(idx(particles[i].pos, 0), idx(particles[i].pos, 1), idx(particles[i].pos, 2))]
        .push_back(static_cast<int>(i));

  std::size_t stride = std::max<std::size_t>(1, particles.size() / max_samples);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < particles.size(); s += stride) {
    const Vec3& p = particles[s].pos;
    std::int64_t ix = idx(p, 0), iy = idx(p, 1), iz = idx(p, 2);
    double best2 = std::numeric_limits<double>::max();
    for (std::int64_t ring = 1;; ++ring) {
      for (std::int64_t dx = -ring; dx <= ring; ++dx)
        for (std::int64_t dy = -ring; dy <= ring; ++dy)
          for (std::int64_t dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring && ring > 1) continue;
            auto it = grid.find(grid_hash(ix + dx, iy + dy, iz + dz));
            if (it == grid.end()) continue;
            for (int j : it->second) {
              if (static_cast<std::size_t>(j) == s) continue;
              best2 = std::min(best2, (p - particles[static_cast<std::size_t>(j)].pos).norm2());
            }
          }
      // A hit in ring r can be beaten by a point in ring r+1 at most.
      if (best2 < std::numeric_limits<double>::max() &&
          std::sqrt(best2) <= cell * static_cast<double>(ring)) break;
      if (cell * static_cast<double>(ring) > diag) break;
    }
    if (best2 < std::numeric_limits<double>::max()) {
      sum += std::sqrt(best2);
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

double default_linking_length(const Particles& particles) {
  return 8.0 * mean_nn_spacing(particles);
}

SchemeKind parse_scheme(const std::string& name) {
  if (name == "hot-morton") return SchemeKind::HotMorton;
  if (name == "hot-hilbert") return SchemeKind::HotHilbert;
  if (name == "orb") return SchemeKind::OrbGlobal;
  if (name == "hybrid-orb") return SchemeKind::HybridOrb;
  throw std::invalid_argument("partition: unknown scheme '" + name +
                              "' (hot-morton|hot-hilbert|orb|hybrid-orb)");
}

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::HotMorton: return "hot-morton";
    case SchemeKind::HotHilbert: return "hot-hilbert";
    case SchemeKind::OrbGlobal: return "orb";
    case SchemeKind::HybridOrb: return "hybrid-orb";
  }
  return "?";
}

}  // namespace fmmlab::partition
