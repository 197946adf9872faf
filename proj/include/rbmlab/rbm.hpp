#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbmlab/geometry.hpp"
#include "rbmlab/rng.hpp"

namespace rbmlab {

/// How an Euler step that leaves the domain is brought back.
///
/// kProjection: X' = P(y). The textbook projected Euler scheme.
/// kReflection: X' = P(2P(y) - y). Mirror the overshoot through the
///   projection point, then project once more in case the mirror image is
///   still outside. 2P - I is nonexpansive for closed convex sets, so the
///   composition keeps the synchronous-coupling contraction exact, while the
///   weak error near the boundary is far smaller than plain projection.
enum class Scheme { kProjection, kReflection };

inline const char* scheme_name(Scheme s) {
  return s == Scheme::kProjection ? "projection" : "reflection";
}

struct PathParams {
  double step_h = 1e-3;
  double horizon_T = 1.0;
  std::size_t n_paths = 10'000;
  std::uint64_t master_seed = 0x5EED;
  Scheme scheme = Scheme::kReflection;
  // Threads used to fan out paths; never changes any numeric output.
  std::size_t workers = 1;

  [[nodiscard]] std::size_t n_steps() const {
    return static_cast<std::size_t>(std::llround(horizon_T / step_h));
  }

  void validate() const {
    if (!(step_h > 0.0)) throw std::invalid_argument("PathParams: step_h must be positive");
    if (!(horizon_T > 0.0)) throw std::invalid_argument("PathParams: horizon_T must be positive");
    if (step_h > horizon_T * (1.0 + 1e-12)) {
      throw std::invalid_argument("PathParams: step_h exceeds horizon_T");
    }
    const double ratio = horizon_T / step_h;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      throw std::invalid_argument("PathParams: horizon_T / step_h is not an integer step count");
    }
    if (n_paths == 0) throw std::invalid_argument("PathParams: n_paths must be positive");
  }

  /// Same law, new horizon: the step is shrunk (never grown) so that it
  /// divides the horizon exactly.
  [[nodiscard]] PathParams with_horizon(double horizon) const {
    if (!(horizon > 0.0)) throw std::invalid_argument("PathParams: horizon must be positive");
    PathParams p = *this;
    const double n = std::max(1.0, std::ceil(horizon / step_h - 1e-9));
    p.horizon_T = horizon;
    p.step_h = horizon / n;
    return p;
  }

  [[nodiscard]] PathParams with_paths(std::size_t m) const {
    PathParams p = *this;
    p.n_paths = m;
    return p;
  }
};

struct RbmState {
  double time = 0.0;
  Point position;
  double local_time = 0.0;
};

struct Trajectory {
  std::vector<RbmState> states;
  std::uint64_t path_index = 0;
};

struct CoupledTrajectory {
  std::vector<Point> x_positions;
  std::vector<Point> y_positions;
  std::vector<double> x_local_time;
  std::vector<double> y_local_time;
  std::vector<double> times;
  double initial_separation = 0.0;

  [[nodiscard]] double separation(std::size_t k) const {
    return distance(x_positions[k], y_positions[k]);
  }
};

namespace detail {

// Moves `pos` by the increment and returns the local-time increment, which
// is the length of the total pushing displacement |X' - (X + dW)|.
inline double apply_step(const ConvexDomain& dom, Point& pos, const Point& dW, Scheme scheme) {
  const Point y = pos + dW;
  const Point p = project(dom, y);
  if (p == y) {
    pos = y;
    return 0.0;
  }
  if (scheme == Scheme::kProjection) {
    pos = p;
  } else {
    pos = project(dom, p * 2.0 - y);
  }
  return distance(pos, y);
}

}  // namespace detail

/// One Euler step driven by the given Gaussian increment dW ~ N(0, h I).
inline RbmState step(const ConvexDomain& dom, const RbmState& state, const Point& dW,
                     double step_h, Scheme scheme) {
  require_same_dim(state.position, dW, "step");
  RbmState next = state;
  next.local_time += detail::apply_step(dom, next.position, dW, scheme);
  next.time += step_h;
  return next;
}

/// Advances several chains in lockstep through one shared increment stream
/// (synchronous coupling). Chain j starts at starts[j].
class CoupledWalker {
 public:
  CoupledWalker(const ConvexDomain& dom, std::span<const Point> starts, double step_h,
                Scheme scheme, std::uint64_t master_seed, std::uint64_t path_index)
      : dom_(&dom),
        pos_(starts.begin(), starts.end()),
        local_(starts.size(), 0.0),
        h_(step_h),
        sqrt_h_(std::sqrt(step_h)),
        scheme_(scheme),
        rng_(master_seed, path_index),
        dW_(dom.dim()) {}

  void advance(std::size_t n_steps) {
    const std::size_t d = dom_->dim();
    for (std::size_t s = 0; s < n_steps; ++s) {
      for (std::size_t k = 0; k < d; ++k) dW_[k] = sqrt_h_ * rng_.normal();
      for (std::size_t j = 0; j < pos_.size(); ++j) {
        local_[j] += detail::apply_step(*dom_, pos_[j], dW_, scheme_);
      }
      ++steps_;
    }
  }

  [[nodiscard]] const std::vector<Point>& positions() const noexcept { return pos_; }
  [[nodiscard]] const std::vector<double>& local_times() const noexcept { return local_; }
  [[nodiscard]] const Point& last_increment() const noexcept { return dW_; }
  [[nodiscard]] std::size_t steps_taken() const noexcept { return steps_; }
  [[nodiscard]] double time() const noexcept { return static_cast<double>(steps_) * h_; }

 private:
  const ConvexDomain* dom_;
  std::vector<Point> pos_;
  std::vector<double> local_;
  double h_;
  double sqrt_h_;
  Scheme scheme_;
  PathRng rng_;
  Point dW_;
  std::size_t steps_ = 0;
};

inline void require_member(const ConvexDomain& dom, const Point& x, const char* what) {
  if (x.dim() != dom.dim()) throw DimensionMismatch(std::string(what) + ": dimension mismatch");
  if (!contains(dom, x)) {
    throw PreconditionError(std::string(what) + ": start point " + to_string(x) +
                            " is outside the domain");
  }
}

/// Full trajectory on the uniform grid {0, h, ..., T}; a pure function of
/// (domain, x0, params, path_index).
inline Trajectory simulate(const ConvexDomain& dom, const Point& x0, const PathParams& params,
                           std::uint64_t path_index) {
  require_member(dom, x0, "simulate");
  params.validate();
  const std::size_t n = params.n_steps();
  const Point start[] = {x0};
  CoupledWalker walker(dom, start, params.step_h, params.scheme, params.master_seed, path_index);
  Trajectory traj;
  traj.path_index = path_index;
  traj.states.reserve(n + 1);
  traj.states.push_back({0.0, x0, 0.0});
  for (std::size_t s = 1; s <= n; ++s) {
    walker.advance(1);
    traj.states.push_back({static_cast<double>(s) * params.step_h, walker.positions()[0],
                           walker.local_times()[0]});
  }
  return traj;
}

inline CoupledTrajectory simulate_coupled(const ConvexDomain& dom, const Point& x0, const Point& y0,
                                          const PathParams& params, std::uint64_t path_index) {
  require_member(dom, x0, "simulate_coupled");
  require_member(dom, y0, "simulate_coupled");
  params.validate();
  const std::size_t n = params.n_steps();
  const Point starts[] = {x0, y0};
  CoupledWalker walker(dom, starts, params.step_h, params.scheme, params.master_seed, path_index);
  CoupledTrajectory out;
  out.initial_separation = distance(x0, y0);
  auto record = [&] {
    out.x_positions.push_back(walker.positions()[0]);
    out.y_positions.push_back(walker.positions()[1]);
    out.x_local_time.push_back(walker.local_times()[0]);
    out.y_local_time.push_back(walker.local_times()[1]);
    out.times.push_back(walker.time());
  };
  record();
  for (std::size_t s = 0; s < n; ++s) {
    walker.advance(1);
    record();
  }
  return out;
}

/// Reflection of w into [lo, hi] by folding: r = (w - lo) mod 2L,
/// position = lo + min(r, 2L - r).
inline double fold_into(double w, double lo, double hi) {
  const double two_l = 2.0 * (hi - lo);
  double r = std::fmod(w - lo, two_l);
  if (r < 0.0) r += two_l;
  return lo + std::min(r, two_l - r);
}

/// Exact reflecting Brownian motion on a box at the query times: a free
/// Brownian path sampled at those times and folded coordinatewise.
inline std::vector<Point> exact_box_path(const ConvexDomain& dom, const Point& x0,
                                         std::span<const double> query_times,
                                         std::uint64_t master_seed, std::uint64_t path_index) {
  const Box* box = dom.as_box();
  if (box == nullptr) throw std::invalid_argument("exact_box_path: domain is not a box");
  require_member(dom, x0, "exact_box_path");
  PathRng rng(master_seed, path_index);
  Point w = x0;
  double t_prev = 0.0;
  std::vector<Point> out;
  out.reserve(query_times.size());
  for (double t : query_times) {
    if (t < t_prev) throw std::invalid_argument("exact_box_path: query times must be sorted and >= 0");
    const double sd = std::sqrt(t - t_prev);
    for (std::size_t k = 0; k < w.dim(); ++k) w[k] += sd * rng.normal();
    Point folded(w.dim());
    for (std::size_t k = 0; k < w.dim(); ++k) folded[k] = fold_into(w[k], box->lo[k], box->hi[k]);
    out.push_back(folded);
    t_prev = t;
  }
  return out;
}

}  // namespace rbmlab
