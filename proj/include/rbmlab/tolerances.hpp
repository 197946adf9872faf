#pragma once

#include <cstddef>

namespace rbmlab {

// Every geometric tolerance lives here so that the checks and the
// simulation agree on what "on the boundary" means.
struct Tolerances {
  double membership = 1e-12;       // closed-set membership slack
  double boundary = 1e-9;          // |dist to boundary| counted as "on" it
  double active_facet = 1e-9;      // |a_i.y - b_i| for active facets
  double dykstra = 1e-10;          // successive-iterate distance
  std::size_t dykstra_max_sweeps = 10'000;
  double contraction = 1e-12;      // per-step expansion allowance
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

}  // namespace rbmlab
