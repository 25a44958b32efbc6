#include <doctest.h>

#include <array>
#include <cmath>

#include "fmmlab/distribution.hpp"

using namespace fmmlab;
using namespace fmmlab::space;

TEST_CASE("uniform cube stays in [0,1)^3 and is reproducible") {
  auto a = generate({DistKind::UniformCube, 8, 1});
  auto b = generate({DistKind::UniformCube, 8, 1});
  REQUIRE(a.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pos == b[i].pos);
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(a[i].pos[d] >= 0.0);
      CHECK(a[i].pos[d] < 1.0);
    }
  }
  auto c = generate({DistKind::UniformCube, 8, 2});
  CHECK(a[0].pos != c[0].pos);
}

TEST_CASE("charges sum to one, ids follow generation order") {
  auto ps = generate({DistKind::SphereVolume, 1000, 3});
  double total = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    total += ps[i].q;
    CHECK(ps[i].id == i);
    CHECK(ps[i].phi == 0.0);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sphere surface has unit radii to 1e-12") {
  auto ps = generate({DistKind::SphereSurface, 1000, 7});
  for (const auto& p : ps) CHECK(std::abs(p.pos.norm() - 1.0) <= 1e-12);
}

TEST_CASE("sphere surface octant counts are within 5% of n/8") {
  const std::size_t n = 100000;
  auto ps = generate({DistKind::SphereSurface, n, 7});
  std::array<std::size_t, 8> counts{};
  for (const auto& p : ps) {
    int o = (p.pos.x >= 0 ? 1 : 0) | (p.pos.y >= 0 ? 2 : 0) | (p.pos.z >= 0 ? 4 : 0);
    ++counts[static_cast<std::size_t>(o)];
  }
  for (auto c : counts) {
    CHECK(static_cast<double>(c) > n / 8.0 * 0.95);
    CHECK(static_cast<double>(c) < n / 8.0 * 1.05);
  }
}

TEST_CASE("n = 0 is rejected") {
  CHECK_THROWS_AS(generate({DistKind::UniformCube, 0, 1}), std::invalid_argument);
}

TEST_CASE("distribution names roundtrip") {
  for (auto k : {DistKind::UniformCube, DistKind::SphereSurface, DistKind::SphereVolume})
    CHECK(parse_dist(to_string(k)) == k);
  CHECK_THROWS_AS(parse_dist("nope"), std::invalid_argument);
}
