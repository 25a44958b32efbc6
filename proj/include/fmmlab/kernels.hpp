#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fmmlab/particle.hpp"

namespace fmmlab::core {

enum class Parallel { Serial, OpenMP };

/// Cartesian monomial basis of total degree < p, graded order (degree-major).
/// All expansion operators run over this index set at runtime, so the order p is
/// a configuration value rather than a compile-time constant.
class MonomialBasis {
 public:
  explicit MonomialBasis(int p);

  int order() const { return p_; }
  int size() const { return static_cast<int>(exps_.size()); }
  const std::array<int, 3>& exps(int i) const { return exps_[static_cast<std::size_t>(i)]; }
  int degree(int i) const { return exps_[static_cast<std::size_t>(i)][0] + exps_[static_cast<std::size_t>(i)][1] + exps_[static_cast<std::size_t>(i)][2]; }
  /// Index of (nx,ny,nz), or -1 when the total degree is p or more.
  int index(int nx, int ny, int nz) const;
  /// nx! ny! nz!
  double factorial_product(int i) const { return fact_[static_cast<std::size_t>(i)]; }

  struct Combo {
    int a, b, ab;  // index(a) + index(b) = index(ab), stays below degree p
  };
  std::span<const Combo> combos() const { return combos_; }

  static int coefficient_count(int p) { return (p * (p + 1) * (p + 2)) / 6; }

 private:
  int p_;
  std::vector<std::array<int, 3>> exps_;
  std::vector<int> lookup_;  // dense (nx,ny,nz) -> index
  std::vector<double> fact_;
  std::vector<Combo> combos_;
};

/// T_n = dx^n / n! for every basis monomial.
void taylor_powers(const MonomialBasis& b, const Vec3& dx, std::span<double> out);

/// H_k = (D^k 1/|r|)(R) / k!, the Taylor-normalized Laplace kernel derivatives.
void laplace_derivatives(const MonomialBasis& b, const Vec3& R, std::span<double> out);

void p2m(const MonomialBasis& b, std::span<const Particle> parts, const Vec3& center,
         std::span<double> M);
void m2m(const MonomialBasis& b, std::span<const double> child_M, const Vec3& child_center,
         const Vec3& parent_center, std::span<double> parent_M);
void m2l(const MonomialBasis& b, std::span<const double> M, const Vec3& source_center,
         const Vec3& target_center, std::span<double> L);
void l2l(const MonomialBasis& b, std::span<const double> parent_L, const Vec3& parent_center,
         const Vec3& child_center, std::span<double> child_L);
void l2p(const MonomialBasis& b, std::span<const double> L, const Vec3& center, Particle& p,
         bool with_force);

/// Far-field evaluation of a multipole at a point; the reference for shift tests.
double eval_multipole(const MonomialBasis& b, std::span<const double> M, const Vec3& center,
                      const Vec3& x);

/// Direct particle-particle sum between two cells' particle ranges. When the
/// ranges alias the same array, identical indices are the self-interactions and
/// are skipped silently; distinct particles at zero distance are skipped and
/// counted.
std::uint64_t p2p(std::span<Particle> targets, std::span<const Particle> sources,
                  bool same_range, bool with_force);

struct DirectStats {
  std::uint64_t coincident_skips = 0;
};

/// O(N^2) reference: phi_i = sum_{j != i} q_j / |x_i - x_j|.
DirectStats direct_sum(Particles& particles, Parallel par = Parallel::Serial,
                       bool with_force = false);
/// Cross variant; targets and sources must not alias.
DirectStats direct_sum(Particles& targets, const Particles& sources,
                       Parallel par = Parallel::Serial, bool with_force = false);

}  // namespace fmmlab::core
