#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace fmmlab {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](std::size_t i) { return (&x)[i]; }
  double operator[](std::size_t i) const { return (&x)[i]; }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3&) const = default;

  double norm2() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm2()); }
};

inline double dist(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Axis-aligned box. A degenerate box (min == max) is a single point.
struct Box3 {
  Vec3 min{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
           std::numeric_limits<double>::max()};
  Vec3 max{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
           std::numeric_limits<double>::lowest()};

  bool operator==(const Box3&) const = default;

  bool valid() const { return min.x <= max.x && min.y <= max.y && min.z <= max.z; }
  bool empty() const { return !valid(); }

  Vec3 center() const { return {(min.x + max.x) * 0.5, (min.y + max.y) * 0.5, (min.z + max.z) * 0.5}; }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
  /// Half-diagonal; the enclosing-sphere radius used by the acceptance criterion.
  double radius() const { return 0.5 * diagonal(); }

  void expand(const Vec3& p) {
    min.x = std::min(min.x, p.x);
    min.y = std::min(min.y, p.y);
    min.z = std::min(min.z, p.z);
    max.x = std::max(max.x, p.x);
    max.y = std::max(max.y, p.y);
    max.z = std::max(max.z, p.z);
  }
  void expand(const Box3& b) {
    expand(b.min);
    expand(b.max);
  }

  Box3 inflated(double eps) const {
    return {{min.x - eps, min.y - eps, min.z - eps}, {max.x + eps, max.y + eps, max.z + eps}};
  }

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }

  bool overlaps(const Box3& o) const {
    return min.x <= o.max.x && o.min.x <= max.x && min.y <= o.max.y && o.min.y <= max.y &&
           min.z <= o.max.z && o.min.z <= max.z;
  }

  /// Distance from p to the nearest point of the box (0 if inside).
  double distance(const Vec3& p) const {
    double d2 = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
      double lo = min[d] - p[d];
      double hi = p[d] - max[d];
      double g = std::max({lo, hi, 0.0});
      d2 += g * g;
    }
    return std::sqrt(d2);
  }

  int longest_dim() const {
    Vec3 e = extent();
    int dim = 0;
    if (e.y > e[dim]) dim = 1;
    if (e.z > e[dim]) dim = 2;
    return dim;
  }
};

}  // namespace fmmlab
