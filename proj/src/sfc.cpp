#include "fmmlab/sfc.hpp"

namespace fmmlab::space {

namespace {

void check_args(std::uint32_t i, std::uint32_t j, std::uint32_t k, int level) {
  if (level < 0 || level > kMaxLevel)
    throw std::invalid_argument("sfc: level must be in [0, 21], got " + std::to_string(level));
  std::uint64_t side = 1ull << level;
  if (i >= side || j >= side || k >= side)
    throw std::invalid_argument("sfc: cell index out of range for level " + std::to_string(level));
}

// Bit-interleave with x least significant within each 3-bit group.
std::uint64_t morton_encode(std::uint32_t i, std::uint32_t j, std::uint32_t k, int level) {
  std::uint64_t key = 0;
  for (int b = 0; b < level; ++b) {
    key |= ((static_cast<std::uint64_t>(i) >> b) & 1ull) << (3 * b);
    key |= ((static_cast<std::uint64_t>(j) >> b) & 1ull) << (3 * b + 1);
    key |= ((static_cast<std::uint64_t>(k) >> b) & 1ull) << (3 * b + 2);
  }
  return key;
}

CellIndex morton_decode(std::uint64_t key, int level) {
  CellIndex c{0, 0, 0, level};
  for (int b = 0; b < level; ++b) {
    c.i |= static_cast<std::uint32_t>((key >> (3 * b)) & 1ull) << b;
    c.j |= static_cast<std::uint32_t>((key >> (3 * b + 1)) & 1ull) << b;
    c.k |= static_cast<std::uint32_t>((key >> (3 * b + 2)) & 1ull) << b;
  }
  return c;
}

}  // namespace

SfcKey encode_key(std::uint32_t i, std::uint32_t j, std::uint32_t k, int level, CurveKind kind) {
  check_args(i, j, k, level);
  if (level == 0) return {0, 0, kind};
  if (kind == CurveKind::Morton) return {morton_encode(i, j, k, level), level, kind};
  std::array<std::uint32_t, 3> axes{i, j, k};
  detail::axes_to_transpose<3>(axes, level);
  return {detail::transpose_to_index<3>(axes, level), level, kind};
}

CellIndex decode_key(const SfcKey& key) {
  if (key.level < 0 || key.level > kMaxLevel)
    throw std::invalid_argument("sfc: bad key level " + std::to_string(key.level));
  if (key.level == 0) return {0, 0, 0, 0};
  if (key.kind == CurveKind::Morton) return morton_decode(key.key, key.level);
  auto axes = detail::index_to_transpose<3>(key.key, key.level);
  detail::transpose_to_axes<3>(axes, key.level);
  return {axes[0], axes[1], axes[2], key.level};
}

namespace detail {

std::uint64_t hilbert2d_encode(std::uint32_t i, std::uint32_t j, int level) {
  std::array<std::uint32_t, 2> axes{i, j};
  axes_to_transpose<2>(axes, level);
  return transpose_to_index<2>(axes, level);
}

std::array<std::uint32_t, 2> hilbert2d_decode(std::uint64_t key, int level) {
  auto axes = index_to_transpose<2>(key, level);
  transpose_to_axes<2>(axes, level);
  return axes;
}

}  // namespace detail

}  // namespace fmmlab::space
