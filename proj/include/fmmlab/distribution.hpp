#pragma once

#include <cstdint>
#include <string>

#include "fmmlab/particle.hpp"

namespace fmmlab::space {

enum class DistKind { UniformCube, SphereSurface, SphereVolume };

struct Distribution {
  DistKind kind = DistKind::SphereSurface;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

/// Deterministic per (kind, n, seed). Charges are 1/n each so the total source
/// strength is one. UniformCube fills [0,1)^3; the sphere kinds are centered at
/// the origin with unit radius, surface points sampled uniformly by area.
Particles generate(const Distribution& dist);

DistKind parse_dist(const std::string& name);
std::string to_string(DistKind kind);

}  // namespace fmmlab::space
