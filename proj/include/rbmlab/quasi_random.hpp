#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace rbmlab {

// Radical-inverse Halton sequence. Deterministic, used for cell-volume and
// polytope-volume estimates where a low-discrepancy fill beats plain MC.
inline double radical_inverse(std::uint64_t index, std::uint32_t base) noexcept {
  double inv_base = 1.0 / base;
  double factor = inv_base;
  double result = 0.0;
  while (index > 0) {
    result += static_cast<double>(index % base) * factor;
    index /= base;
    factor *= inv_base;
  }
  return result;
}

inline constexpr std::array<std::uint32_t, 8> kHaltonBases = {2, 3, 5, 7, 11, 13, 17, 19};

/// Coordinate `axis` of the `index`-th Halton point in [0,1)^d.
inline double halton(std::uint64_t index, std::size_t axis) noexcept {
  return radical_inverse(index, kHaltonBases[axis]);
}

}  // namespace rbmlab
