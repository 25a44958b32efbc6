#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fmmlab/kernels.hpp"

using namespace fmmlab;
using namespace fmmlab::core;

namespace {

double inv_r(const Vec3& x) { return 1.0 / x.norm(); }

// Nested central differences; the independent oracle for the derivative table.
double fd_derivative(const std::function<double(const Vec3&)>& f, std::array<int, 3> k,
                     const Vec3& x, double h) {
  for (int d = 0; d < 3; ++d) {
    if (k[d] == 0) continue;
    auto km = k;
    --km[d];
    Vec3 hi = x, lo = x;
    hi[static_cast<std::size_t>(d)] += h;
    lo[static_cast<std::size_t>(d)] -= h;
    return (fd_derivative(f, km, hi, h) - fd_derivative(f, km, lo, h)) / (2.0 * h);
  }
  return f(x);
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

Particles random_cloud(std::size_t n, std::uint64_t seed, Vec3 offset = {}, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  auto u = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Particles ps(n);
  for (std::size_t i = 0; i < n; ++i) {
    ps[i].pos = offset + Vec3{u(), u(), u()} * scale;
    ps[i].q = u() - 0.25;
    ps[i].id = static_cast<std::uint32_t>(i);
  }
  return ps;
}

}  // namespace

TEST_CASE("monomial basis enumerates all degrees below p") {
  MonomialBasis b(4);
  CHECK(b.size() == 20);  // C(6,3)
  CHECK(MonomialBasis::coefficient_count(2) == 4);
  CHECK(MonomialBasis::coefficient_count(6) == 56);
  CHECK(b.index(0, 0, 0) == 0);
  CHECK(b.index(3, 1, 0) == -1);  // degree 4 is out
  CHECK(b.index(1, 1, 1) >= 0);
  CHECK(b.factorial_product(b.index(3, 0, 0)) == 6.0);
  CHECK_THROWS_AS(MonomialBasis(0), std::invalid_argument);
}

TEST_CASE("laplace derivative table: closed forms at degree <= 2") {
  MonomialBasis b(4);
  Vec3 R{1.1, -0.7, 2.3};
  double r = R.norm();
  std::vector<double> H(static_cast<std::size_t>(b.size()));
  laplace_derivatives(b, R, H);

  CHECK(H[0] == doctest::Approx(1.0 / r).epsilon(1e-14));
  CHECK(H[static_cast<std::size_t>(b.index(1, 0, 0))] ==
        doctest::Approx(-R.x / std::pow(r, 3)).epsilon(1e-13));
  CHECK(H[static_cast<std::size_t>(b.index(0, 1, 0))] ==
        doctest::Approx(-R.y / std::pow(r, 3)).epsilon(1e-13));
  // H_{2ex} = (3 Rx^2 / r^5 - 1 / r^3) / 2
  CHECK(H[static_cast<std::size_t>(b.index(2, 0, 0))] ==
        doctest::Approx((3.0 * R.x * R.x / std::pow(r, 5) - 1.0 / std::pow(r, 3)) / 2.0)
            .epsilon(1e-13));
  // mixed: H_{ex+ey} = 3 Rx Ry / r^5
  CHECK(H[static_cast<std::size_t>(b.index(1, 1, 0))] ==
        doctest::Approx(3.0 * R.x * R.y / std::pow(r, 5)).epsilon(1e-13));
}

TEST_CASE("laplace derivative table matches finite differences through degree 3") {
  MonomialBasis b(4);
  for (Vec3 R : {Vec3{1.1, -0.7, 2.3}, Vec3{-2.0, 0.4, 0.9}, Vec3{3.0, 3.0, -3.0}}) {
    std::vector<double> H(static_cast<std::size_t>(b.size()));
    laplace_derivatives(b, R, H);
    for (int i = 0; i < b.size(); ++i) {
      auto e = b.exps(i);
      double fd = fd_derivative(inv_r, e, R, 5e-3) / b.factorial_product(i);
      CHECK(H[static_cast<std::size_t>(i)] == doctest::Approx(fd).epsilon(2e-4));
    }
  }
}

TEST_CASE("taylor powers are dx^n / n!") {
  MonomialBasis b(5);
  Vec3 dx{0.3, -1.2, 0.7};
  std::vector<double> T(static_cast<std::size_t>(b.size()));
  taylor_powers(b, dx, T);
  for (int i = 0; i < b.size(); ++i) {
    auto e = b.exps(i);
    double expect = std::pow(dx.x, e[0]) * std::pow(dx.y, e[1]) * std::pow(dx.z, e[2]) /
                    (factorial(e[0]) * factorial(e[1]) * factorial(e[2]));
    CHECK(T[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("p2m of a particle at the center is a pure monopole") {
  MonomialBasis b(4);
  Particles ps{{{0.5, 0.5, 0.5}, 1.0}};
  std::vector<double> M(static_cast<std::size_t>(b.size()), 0.0);
  p2m(b, ps, {0.5, 0.5, 0.5}, M);
  CHECK(M[0] == 1.0);
  for (int i = 1; i < b.size(); ++i) CHECK(M[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("monopole equals total charge regardless of the center") {
  MonomialBasis b(4);
  auto ps = random_cloud(100, 2);
  double total = 0.0;
  for (const auto& p : ps) total += p.q;
  std::vector<double> M(static_cast<std::size_t>(b.size()), 0.0);
  p2m(b, ps, {10.0, -3.0, 0.1}, M);
  CHECK(M[0] == doctest::Approx(total).epsilon(1e-14));
}

TEST_CASE("multipole evaluated far away reproduces the direct sum at O((r/d)^p)") {
  auto ps = random_cloud(64, 7);  // cloud in the unit cube
  Vec3 center{0.5, 0.5, 0.5};
  double r = 0.5 * std::sqrt(3.0);
  Vec3 far = center + Vec3{10.0 * r, 0, 0};

  double exact = 0.0;
  for (const auto& p : ps) exact += p.q / (far - p.pos).norm();

  for (int p_order : {2, 4, 6}) {
    MonomialBasis b(p_order);
    std::vector<double> M(static_cast<std::size_t>(b.size()), 0.0);
    p2m(b, ps, center, M);
    double approx = eval_multipole(b, M, center, far);
    double bound = 4.0 * std::pow(0.1, p_order);  // modest constant over (r/d)^p
    CHECK(std::abs(approx - exact) / std::abs(exact) <= bound);
  }
}

TEST_CASE("m2m shift equals moments taken directly about the parent center") {
  MonomialBasis b(4);
  auto ps = random_cloud(50, 3);
  Vec3 child_center{0.4, 0.6, 0.5}, parent_center{0.9, 0.1, 0.2};

  std::vector<double> Mc(static_cast<std::size_t>(b.size()), 0.0);
  p2m(b, ps, child_center, Mc);
  std::vector<double> Mp(static_cast<std::size_t>(b.size()), 0.0);
  m2m(b, Mc, child_center, parent_center, Mp);

  std::vector<double> Mdirect(static_cast<std::size_t>(b.size()), 0.0);
  p2m(b, ps, parent_center, Mdirect);
  for (int i = 0; i < b.size(); ++i)
    CHECK(Mp[static_cast<std::size_t>(i)] ==
          doctest::Approx(Mdirect[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("l2l shift is exact for the truncated polynomial") {
  MonomialBasis b(4);
  std::mt19937_64 rng(9);
  auto u = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5; };
  std::vector<double> L(static_cast<std::size_t>(b.size()));
  for (auto& v : L) v = u();
  Vec3 parent{0.0, 0.0, 0.0}, child{0.3, -0.2, 0.15};

  std::vector<double> Lc(static_cast<std::size_t>(b.size()), 0.0);
  l2l(b, L, parent, child, Lc);

  // Evaluating either expansion at the same point must agree exactly.
  for (Vec3 x : {Vec3{0.31, -0.18, 0.16}, Vec3{0.5, 0.1, -0.1}}) {
    Particle a{x}, c{x};
    l2p(b, L, parent, a, false);
    l2p(b, Lc, child, c, false);
    CHECK(a.phi == doctest::Approx(c.phi).epsilon(1e-12));
  }
}

TEST_CASE("m2l local coefficient at the target center matches the multipole value") {
  MonomialBasis b(4);
  auto ps = random_cloud(30, 4);
  Vec3 src_center{0.5, 0.5, 0.5}, tgt_center{6.0, 5.0, 4.0};
  std::vector<double> M(static_cast<std::size_t>(b.size()), 0.0);
  p2m(b, ps, src_center, M);

  std::vector<double> L(static_cast<std::size_t>(b.size()), 0.0);
  m2l(b, M, src_center, tgt_center, L);
  // phi at the expansion point is the zeroth local coefficient
  CHECK(L[0] == doctest::Approx(eval_multipole(b, M, src_center, tgt_center)).epsilon(1e-12));
}

TEST_CASE("direct sum: two unit charges at distance one") {
  Particles ps{{{0, 0, 0}, 1.0}, {{1, 0, 0}, 1.0}};
  direct_sum(ps);
  CHECK(ps[0].phi == 1.0);
  CHECK(ps[1].phi == 1.0);
}

TEST_CASE("direct sum: cube corners see identical potential by symmetry") {
  Particles ps;
  for (int o = 0; o < 8; ++o)
    ps.push_back({{double(o & 1), double((o >> 1) & 1), double((o >> 2) & 1)}, 1.0});
  direct_sum(ps);
  for (const auto& p : ps) CHECK(p.phi == doctest::Approx(ps[0].phi).epsilon(1e-14));
}

TEST_CASE("direct sum: kernel symmetry under role swap") {
  auto a = random_cloud(40, 5);
  auto b = random_cloud(40, 6, {2.0, 0.0, 0.0});
  auto a1 = a;
  direct_sum(a1, b);
  auto b1 = b;
  direct_sum(b1, a);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) lhs += a[i].q * a1[i].phi;
  for (std::size_t i = 0; i < b.size(); ++i) rhs += b[i].q * b1[i].phi;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("direct sum counts coincident pairs and skips them") {
  Particles ps{{{0, 0, 0}, 1.0}, {{0, 0, 0}, 1.0}, {{1, 0, 0}, 1.0}};
  auto stats = direct_sum(ps);
  CHECK(stats.coincident_skips == 2);  // the coincident pair, seen from each side
  CHECK(std::isfinite(ps[0].phi));
  CHECK(ps[2].phi == 2.0);
}

TEST_CASE("openmp direct sum is bit-identical to serial") {
  auto ps = random_cloud(500, 8);
  auto serial = ps;
  direct_sum(serial, Parallel::Serial, true);
  auto parallel = ps;
  direct_sum(parallel, Parallel::OpenMP, true);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CHECK(serial[i].phi == parallel[i].phi);
    CHECK(serial[i].force == parallel[i].force);
  }
}

TEST_CASE("force is the negative gradient of the potential") {
  Particles tgt{{{0.0, 0.0, 0.0}, 1.0}};
  Particles src{{{2.0, 1.0, -1.0}, 3.0}};
  direct_sum(tgt, src, Parallel::Serial, true);
  double h = 1e-6;
  for (std::size_t d = 0; d < 3; ++d) {
    Particles hi = tgt, lo = tgt;
    hi[0].phi = lo[0].phi = 0.0;
    hi[0].pos[d] += h;
    lo[0].pos[d] -= h;
    direct_sum(hi, src);
    direct_sum(lo, src);
    double grad = (hi[0].phi - lo[0].phi) / (2 * h);
    CHECK(tgt[0].force[d] == doctest::Approx(-grad).epsilon(1e-6));
  }
}
