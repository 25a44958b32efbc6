#pragma once

#include <cstdint>
#include <vector>

#include "fmmlab/geometry.hpp"

namespace fmmlab {

/// Source/target point. phi and force accumulate during evaluation and must be
/// zero beforehand; id tracks the particle through partitioning and reordering.
struct Particle {
  Vec3 pos;
  double q = 0.0;
  double phi = 0.0;
  Vec3 force;  // negative gradient of phi, filled only when requested
  std::uint32_t id = 0;

  bool operator==(const Particle&) const = default;
};

using Particles = std::vector<Particle>;

inline void reset_outputs(Particles& ps) {
  for (auto& p : ps) {
    p.phi = 0.0;
    p.force = {};
  }
}

inline Box3 bounding_box(const Particles& ps) {
  Box3 b;
  for (const auto& p : ps) b.expand(p.pos);
  return b;
}

}  // namespace fmmlab
