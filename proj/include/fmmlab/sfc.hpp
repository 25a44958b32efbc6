#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace fmmlab::space {

/// 64-bit keys hold 3 bits per octree level, so 21 levels fit.
inline constexpr int kMaxLevel = 21;

enum class CurveKind { Morton, Hilbert };

struct SfcKey {
  std::uint64_t key = 0;
  int level = 0;
  CurveKind kind = CurveKind::Morton;

  bool operator==(const SfcKey&) const = default;
  /// Key of the parent cell (one level coarser). Valid for path keys of both kinds
  /// only at level > 0; Morton path keys drop the three low bits.
  SfcKey parent() const { return {key >> 3, level - 1, kind}; }
};

struct CellIndex {
  std::uint32_t i = 0, j = 0, k = 0;
  int level = 0;
  bool operator==(const CellIndex&) const = default;
};

SfcKey encode_key(std::uint32_t i, std::uint32_t j, std::uint32_t k, int level, CurveKind kind);
CellIndex decode_key(const SfcKey& key);

namespace detail {
// Hilbert curve in transpose form (Skilling's construction), n dimensions x b bits.
// Exposed for the 2D unit-square analogue used in tests.
template <int N>
void axes_to_transpose(std::array<std::uint32_t, N>& x, int bits) {
  std::uint32_t m = 1u << (bits - 1);
  // Inverse undo
  for (std::uint32_t q = m; q > 1; q >>= 1) {
    std::uint32_t p = q - 1;
    for (int i = 0; i < N; ++i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        std::uint32_t t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  // Gray encode
  for (int i = 1; i < N; ++i) x[i] ^= x[i - 1];
  std::uint32_t t = 0;
  for (std::uint32_t q = m; q > 1; q >>= 1)
    if (x[N - 1] & q) t ^= q - 1;
  for (int i = 0; i < N; ++i) x[i] ^= t;
}

template <int N>
void transpose_to_axes(std::array<std::uint32_t, N>& x, int bits) {
  std::uint32_t m = 2u << (bits - 1);
  // Gray decode by H ^ (H/2)
  std::uint32_t t = x[N - 1] >> 1;
  for (int i = N - 1; i > 0; --i) x[i] ^= x[i - 1];
  x[0] ^= t;
  // Undo excess work
  for (std::uint32_t q = 2; q != m; q <<= 1) {
    std::uint32_t p = q - 1;
    for (int i = N - 1; i >= 0; --i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        std::uint32_t s = (x[0] ^ x[i]) & p;
        x[0] ^= s;
        x[i] ^= s;
      }
    }
  }
}

// Pack the transpose form into a single index, x[0] holding the most significant bit
// of each group, and unpack again.
template <int N>
std::uint64_t transpose_to_index(const std::array<std::uint32_t, N>& x, int bits) {
  std::uint64_t h = 0;
  for (int b = bits - 1; b >= 0; --b)
    for (int i = 0; i < N; ++i) h = (h << 1) | ((x[i] >> b) & 1u);
  return h;
}

template <int N>
std::array<std::uint32_t, N> index_to_transpose(std::uint64_t h, int bits) {
  std::array<std::uint32_t, N> x{};
  for (int b = 0; b < bits; ++b)
    for (int i = N - 1; i >= 0; --i) {
      x[i] |= static_cast<std::uint32_t>(h & 1u) << b;
      h >>= 1;
    }
  return x;
}

std::uint64_t hilbert2d_encode(std::uint32_t i, std::uint32_t j, int level);
std::array<std::uint32_t, 2> hilbert2d_decode(std::uint64_t key, int level);
}  // namespace detail

}  // namespace fmmlab::space
