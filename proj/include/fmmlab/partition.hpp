#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fmmlab/particle.hpp"
#include "fmmlab/sfc.hpp"

namespace fmmlab::partition {

enum class SchemeKind { HotMorton, HotHilbert, OrbGlobal, HybridOrb };

struct PartitionScheme {
  SchemeKind kind = SchemeKind::HybridOrb;
  int ranks = 1;
  int n_leaf = 64;  // sets the HOT key sampling depth
};

/// One rank's share of the particles. bounds is tight over the owned set.
struct Partition {
  int rank = 0;
  Box3 bounds;
  Particles particles;
  std::size_t count() const { return particles.size(); }
};

/// Outcome of the iterative histogram search. When the input is duplicate-heavy
/// the search can stall; it then reports the best achievable split instead of
/// failing, with converged = false.
template <typename T>
struct SplitterResult {
  T splitter{};
  std::size_t count_below = 0;
  std::size_t imbalance = 0;  // |count_below - target|
  bool converged = false;
  int iterations = 0;
};

/// Find s such that the number of values < s is within +-tol of target, by
/// iterative histogram refinement over the per-rank lists. Only bin counts are
/// combined across lists; values never move.
SplitterResult<double> find_splitter(std::span<const std::vector<double>> per_rank_values,
                                     std::size_t target, std::size_t tol);
SplitterResult<std::uint64_t> find_splitter(std::span<const std::vector<std::uint64_t>> per_rank_values,
                                            std::size_t target, std::size_t tol);

struct OrbSplitRecord {
  int axis = 0;
  Vec3 extent;  // extent of the node's tight box when the split was chosen
};

std::vector<Partition> make_partitions(const Particles& particles, const PartitionScheme& scheme,
                                       std::vector<OrbSplitRecord>* trace = nullptr);

/// Number of connected components under single-linkage at the given length.
int connectivity_components(const Particles& particles, double linking_length);

/// Mean nearest-neighbor distance over a deterministic sample of the particles.
double mean_nn_spacing(const Particles& particles, std::size_t max_samples = 1024);

/// Default linking length for the discontinuity metric. Eight mean
/// nearest-neighbor spacings: wide enough that sampling stragglers on a
/// partition boundary do not read as extra components, narrow enough that the
/// space-filling-curve jumps this metric exists to expose still do.
double default_linking_length(const Particles& particles);

SchemeKind parse_scheme(const std::string& name);
std::string to_string(SchemeKind kind);

}  // namespace fmmlab::partition
