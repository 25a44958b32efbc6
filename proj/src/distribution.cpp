#include "fmmlab/distribution.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace fmmlab::space {

namespace {

// uniform_real_distribution is implementation-defined; map raw bits ourselves so
// streams are identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Particles generate(const Distribution& dist) {
  if (dist.n == 0) throw std::invalid_argument("distribution: n must be positive");
  std::mt19937_64 rng(dist.seed);
  Particles ps(dist.n);
  const double q = 1.0 / static_cast<double>(dist.n);
  for (std::size_t i = 0; i < dist.n; ++i) {
    Vec3 x;
    switch (dist.kind) {
      case DistKind::UniformCube:
        x = {uniform01(rng), uniform01(rng), uniform01(rng)};
        break;
      case DistKind::SphereSurface:
      case DistKind::SphereVolume: {
        double cos_theta = 1.0 - 2.0 * uniform01(rng);
        double phi = 2.0 * std::numbers::pi * uniform01(rng);
        double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
        double r = 1.0;
        if (dist.kind == DistKind::SphereVolume) r = std::cbrt(uniform01(rng));
        x = {r * sin_theta * std::cos(phi), r * sin_theta * std::sin(phi), r * cos_theta};
        break;
      }
    }
    ps[i] = Particle{x, q, 0.0, {}, static_cast<std::uint32_t>(i)};
  }
  return ps;
}

DistKind parse_dist(const std::string& name) {
  if (name == "cube") return DistKind::UniformCube;
  if (name == "sphere") return DistKind::SphereSurface;
  if (name == "ball") return DistKind::SphereVolume;
  throw std::invalid_argument("distribution: unknown kind '" + name + "' (cube|sphere|ball)");
}

std::string to_string(DistKind kind) {
  switch (kind) {
    case DistKind::UniformCube: return "cube";
    case DistKind::SphereSurface: return "sphere";
    case DistKind::SphereVolume: return "ball";
  }
  return "?";
}

}  // namespace fmmlab::space
