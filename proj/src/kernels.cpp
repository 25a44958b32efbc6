#include "fmmlab/kernels.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace fmmlab::core {

MonomialBasis::MonomialBasis(int p) : p_(p) {
  if (p < 1 || p > 16) throw std::invalid_argument("kernels: expansion order must be in [1, 16]");
  exps_.reserve(static_cast<std::size_t>(coefficient_count(p)));
  for (int d = 0; d < p; ++d)
    for (int nx = d; nx >= 0; --nx)
      for (int ny = d - nx; ny >= 0; --ny) exps_.push_back({nx, ny, d - nx - ny});

  lookup_.assign(static_cast<std::size_t>(p * p * p), -1);
  for (int i = 0; i < size(); ++i) {
    const auto& e = exps_[static_cast<std::size_t>(i)];
    lookup_[static_cast<std::size_t>((e[0] * p + e[1]) * p + e[2])] = i;
  }

  auto factorial = [](int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
  };
  fact_.resize(exps_.size());
  for (int i = 0; i < size(); ++i) {
    const auto& e = exps_[static_cast<std::size_t>(i)];
    fact_[static_cast<std::size_t>(i)] = factorial(e[0]) * factorial(e[1]) * factorial(e[2]);
  }

  for (int a = 0; a < size(); ++a)
    for (int b = 0; b < size(); ++b) {
      if (degree(a) + degree(b) >= p) continue;
      const auto& ea = exps_[static_cast<std::size_t>(a)];
      const auto& eb = exps_[static_cast<std::size_t>(b)];
      combos_.push_back({a, b, index(ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2])});
    }
}

int MonomialBasis::index(int nx, int ny, int nz) const {
  if (nx < 0 || ny < 0 || nz < 0 || nx + ny + nz >= p_) return -1;
  return lookup_[static_cast<std::size_t>((nx * p_ + ny) * p_ + nz)];
}

void taylor_powers(const MonomialBasis& b, const Vec3& dx, std::span<double> out) {
  assert(out.size() == static_cast<std::size_t>(b.size()));
  out[0] = 1.0;
  for (int i = 1; i < b.size(); ++i) {
    const auto& e = b.exps(i);
    int d = e[0] > 0 ? 0 : (e[1] > 0 ? 1 : 2);
    int prev = d == 0 ? b.index(e[0] - 1, e[1], e[2])
                      : (d == 1 ? b.index(e[0], e[1] - 1, e[2]) : b.index(e[0], e[1], e[2] - 1));
    out[static_cast<std::size_t>(i)] =
        out[static_cast<std::size_t>(prev)] * dx[static_cast<std::size_t>(d)] / e[d];
  }
}

void laplace_derivatives(const MonomialBasis& b, const Vec3& R, std::span<double> out) {
  assert(out.size() == static_cast<std::size_t>(b.size()));
  const double r2 = R.norm2();
  assert(r2 > 0.0);
  const double inv_r2 = 1.0 / r2;
  out[0] = std::sqrt(inv_r2);
  for (int i = 1; i < b.size(); ++i) {
    const auto& k = b.exps(i);
    const int m = k[0] + k[1] + k[2];
    double s = 0.0;
    for (int d = 0; d < 3; ++d) {
      if (k[d] < 1) continue;
      std::array<int, 3> e = k;
      --e[d];
      s -= (2.0 * m - 1.0) * R[static_cast<std::size_t>(d)] *
           out[static_cast<std::size_t>(b.index(e[0], e[1], e[2]))];
      if (k[d] >= 2) {
        --e[d];
        s -= (m - 1.0) * out[static_cast<std::size_t>(b.index(e[0], e[1], e[2]))];
      }
    }
    out[static_cast<std::size_t>(i)] = s * inv_r2 / m;
  }
}

void p2m(const MonomialBasis& b, std::span<const Particle> parts, const Vec3& center,
         std::span<double> M) {
  std::vector<double> T(static_cast<std::size_t>(b.size()));
  for (const auto& part : parts) {
    taylor_powers(b, center - part.pos, T);
    for (int i = 0; i < b.size(); ++i)
      M[static_cast<std::size_t>(i)] += part.q * T[static_cast<std::size_t>(i)];
  }
}

void m2m(const MonomialBasis& b, std::span<const double> child_M, const Vec3& child_center,
         const Vec3& parent_center, std::span<double> parent_M) {
  std::vector<double> T(static_cast<std::size_t>(b.size()));
  taylor_powers(b, parent_center - child_center, T);
  for (const auto& c : b.combos())
    parent_M[static_cast<std::size_t>(c.ab)] +=
        T[static_cast<std::size_t>(c.a)] * child_M[static_cast<std::size_t>(c.b)];
}

void m2l(const MonomialBasis& b, std::span<const double> M, const Vec3& source_center,
         const Vec3& target_center, std::span<double> L) {
  std::vector<double> H(static_cast<std::size_t>(b.size()));
  laplace_derivatives(b, target_center - source_center, H);
  for (int i = 0; i < b.size(); ++i) H[static_cast<std::size_t>(i)] *= b.factorial_product(i);
  for (const auto& c : b.combos())
    L[static_cast<std::size_t>(c.b)] +=
        M[static_cast<std::size_t>(c.a)] * H[static_cast<std::size_t>(c.ab)];
}

void l2l(const MonomialBasis& b, std::span<const double> parent_L, const Vec3& parent_center,
         const Vec3& child_center, std::span<double> child_L) {
  std::vector<double> T(static_cast<std::size_t>(b.size()));
  taylor_powers(b, child_center - parent_center, T);
  for (const auto& c : b.combos())
    child_L[static_cast<std::size_t>(c.b)] +=
        T[static_cast<std::size_t>(c.a)] * parent_L[static_cast<std::size_t>(c.ab)];
}

void l2p(const MonomialBasis& b, std::span<const double> L, const Vec3& center, Particle& p,
         bool with_force) {
  std::vector<double> T(static_cast<std::size_t>(b.size()));
  taylor_powers(b, p.pos - center, T);
  double phi = 0.0;
  for (int i = 0; i < b.size(); ++i)
    phi += L[static_cast<std::size_t>(i)] * T[static_cast<std::size_t>(i)];
  p.phi += phi;
  if (with_force) {
    Vec3 grad;
    for (int i = 0; i < b.size(); ++i) {
      const auto& e = b.exps(i);
      for (int d = 0; d < 3; ++d) {
        if (e[d] < 1) continue;
        std::array<int, 3> m = e;
        --m[d];
        grad[static_cast<std::size_t>(d)] += L[static_cast<std::size_t>(i)] *
                                             T[static_cast<std::size_t>(b.index(m[0], m[1], m[2]))];
      }
    }
    p.force += grad * -1.0;
  }
}

double eval_multipole(const MonomialBasis& b, std::span<const double> M, const Vec3& center,
                      const Vec3& x) {
  std::vector<double> H(static_cast<std::size_t>(b.size()));
  laplace_derivatives(b, x - center, H);
  double phi = 0.0;
  for (int i = 0; i < b.size(); ++i)
    phi += M[static_cast<std::size_t>(i)] * b.factorial_product(i) * H[static_cast<std::size_t>(i)];
  return phi;
}

std::uint64_t p2p(std::span<Particle> targets, std::span<const Particle> sources, bool same_range,
                  bool with_force) {
  std::uint64_t skips = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto& t = targets[i];
    double phi = 0.0;
    Vec3 grad_neg;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      if (same_range && i == j) continue;
      Vec3 d = t.pos - sources[j].pos;
      double r2 = d.norm2();
      if (r2 == 0.0) {
        ++skips;
        continue;
      }
      double inv_r = 1.0 / std::sqrt(r2);
      phi += sources[j].q * inv_r;
      if (with_force) grad_neg += d * (sources[j].q * inv_r * inv_r * inv_r);
    }
    t.phi += phi;
    if (with_force) t.force += grad_neg;
  }
  return skips;
}

namespace {

template <bool kSame>
DirectStats direct_sum_impl(Particles& targets, const Particles& sources, Parallel par,
                            bool with_force) {
  std::uint64_t skips = 0;
  const auto n = static_cast<std::int64_t>(targets.size());
#pragma omp parallel for schedule(static) reduction(+ : skips) if (par == Parallel::OpenMP)
  for (std::int64_t i = 0; i < n; ++i) {
    auto& t = targets[static_cast<std::size_t>(i)];
    double phi = 0.0;
    Vec3 grad_neg;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      if constexpr (kSame)
        if (static_cast<std::size_t>(i) == j) continue;
      Vec3 d = t.pos - sources[j].pos;
      double r2 = d.norm2();
      if (r2 == 0.0) {
        ++skips;
        continue;
      }
      double inv_r = 1.0 / std::sqrt(r2);
      phi += sources[j].q * inv_r;
      if (with_force) grad_neg += d * (sources[j].q * inv_r * inv_r * inv_r);
    }
    t.phi += phi;
    if (with_force) t.force += grad_neg;
  }
  return {skips};
}

}  // namespace

DirectStats direct_sum(Particles& particles, Parallel par, bool with_force) {
  return direct_sum_impl<true>(particles, particles, par, with_force);
}

DirectStats direct_sum(Particles& targets, const Particles& sources, Parallel par,
                       bool with_force) {
  return direct_sum_impl<false>(targets, sources, par, with_force);
}

}  // namespace fmmlab::core
