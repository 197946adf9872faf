#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rbmlab/geometry.hpp"
#include "rbmlab/grid.hpp"
#include "rbmlab/rbm.hpp"
#include "rbmlab/rng.hpp"
#include "rbmlab/semigroup.hpp"
#include "rbmlab/stats.hpp"
#include "rbmlab/test_functions.hpp"

namespace rbmlab {

// ---------------------------------------------------------------------------
// Reports

struct TestPoint {
  std::string inputs;
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  double tolerance = 0.0;  // absolute slack for floating-point accumulation
  bool pass = true;

  /// rhs + 2 sigma + tolerance - lhs; negative means violated.
  [[nodiscard]] double margin() const { return rhs + 2.0 * (lhs_se + rhs_se) + tolerance - lhs; }
};

struct InequalityReport {
  std::string test_name;
  std::vector<TestPoint> points;
  std::size_t violation_count = 0;
  double worst_margin = std::numeric_limits<double>::infinity();

  void add(TestPoint p) {
    p.pass = p.margin() >= 0.0;
    if (!p.pass) ++violation_count;
    worst_margin = std::min(worst_margin, p.margin());
    points.push_back(std::move(p));
  }

  [[nodiscard]] bool passed() const noexcept { return violation_count == 0; }
};

struct PowerLawFit {
  double exponent = 0.0;
  double log_constant = 0.0;
  double r_squared = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  std::size_t n_points = 0;
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> std_error;
};

/// log value = log_constant + exponent * log t.
inline PowerLawFit fit_power_law(std::span<const double> t, std::span<const double> value,
                                 std::span<const double> std_error = {}) {
  if (t.size() < 4) throw std::invalid_argument("fit_power_law: need at least 4 points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !(value[i] > 0.0)) {
      throw std::invalid_argument("fit_power_law: nonpositive value at t = " + std::to_string(t[i]));
    }
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(value[i]));
  }
  const LineFit lf = fit_line(lx, ly);
  PowerLawFit f;
  f.exponent = lf.slope;
  f.log_constant = lf.intercept;
  f.r_squared = lf.r_squared;
  f.t_min = *std::min_element(t.begin(), t.end());
  f.t_max = *std::max_element(t.begin(), t.end());
  f.n_points = t.size();
  f.t.assign(t.begin(), t.end());
  f.value.assign(value.begin(), value.end());
  f.std_error.assign(std_error.begin(), std_error.end());
  return f;
}

inline std::string describe(const Point& x) { return to_string(x); }

// ---------------------------------------------------------------------------
// Sampling helpers

/// n points uniform in the domain (rejection from the bounding box). Uses a
/// stream disjoint from the path streams of the same seed.
inline std::vector<Point> sample_uniform(const ConvexDomain& dom, std::size_t n, std::uint64_t seed) {
  const Box& bb = dom.bounding_box();
  PathRng rng(splitmix64_mix(seed ^ 0x51A7E5A3D1CE0F1BULL), 0);
  std::vector<Point> out;
  out.reserve(n);
  Point p(dom.dim());
  while (out.size() < n) {
    for (std::size_t k = 0; k < dom.dim(); ++k) p[k] = bb.lo[k] + rng.uniform() * bb.length(k);
    if (contains(dom, p)) out.push_back(p);
  }
  return out;
}

inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw std::invalid_argument("log_spaced: bad range");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return v;
}

/// Step size for a run to process time `horizon`: the configured step,
/// refined so that at least `min_steps` steps are taken.
inline PathParams params_for_horizon(const PathParams& params, double horizon, std::size_t min_steps) {
  PathParams p = params;
  if (min_steps > 0) p.step_h = std::min(p.step_h, horizon / static_cast<double>(min_steps));
  return p.with_horizon(horizon);
}

// ---------------------------------------------------------------------------
// Pathwise contraction

/// Runs n_pairs synchronously coupled pairs for params.n_steps() steps and
/// records, per pair, the largest one-step growth of the separation.
inline InequalityReport check_contraction(const ConvexDomain& dom, std::span<const Point> xs,
                                          std::span<const Point> ys, const PathParams& params) {
  if (xs.size() != ys.size()) throw std::invalid_argument("check_contraction: unpaired starts");
  params.validate();
  const std::size_t n = params.n_steps();
  std::vector<double> worst(xs.size(), 0.0), final_sep(xs.size(), 0.0);
  parallel_for(xs.size(), params.workers, [&](std::size_t i) {
    require_member(dom, xs[i], "check_contraction");
    require_member(dom, ys[i], "check_contraction");
    const Point starts[] = {xs[i], ys[i]};
    CoupledWalker w(dom, starts, params.step_h, params.scheme, params.master_seed, i);
    double sep = distance(xs[i], ys[i]);
    double growth = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      w.advance(1);
      const double next = distance(w.positions()[0], w.positions()[1]);
      growth = std::max(growth, next - sep);
      sep = next;
    }
    worst[i] = n ? growth : 0.0;
    final_sep[i] = sep;
  });
  InequalityReport r;
  r.test_name = "contraction";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    r.add({"x=" + describe(xs[i]) + " y=" + describe(ys[i]) +
               " final_sep=" + std::to_string(final_sep[i]),
           worst[i], 0.0, 0.0, 0.0, default_tolerances().contraction});
  }
  return r;
}

inline InequalityReport check_contraction(const ConvexDomain& dom, std::size_t n_pairs,
                                          const PathParams& params) {
  const std::vector<Point> pts = sample_uniform(dom, 2 * n_pairs, params.master_seed);
  const std::span<const Point> all(pts);
  return check_contraction(dom, all.first(n_pairs), all.last(n_pairs), params);
}

// ---------------------------------------------------------------------------
// Gradient commutation and the variance bound

/// A test case (f, x, process time t).
struct Triple {
  TestFunction f;
  Point x;
  double t = 0.0;
};

inline std::vector<Triple> cartesian_triples(std::span<const TestFunction> fs, std::span<const Point> xs,
                                             std::span<const double> ts) {
  std::vector<Triple> out;
  for (const auto& f : fs) {
    for (const auto& x : xs) {
      for (double t : ts) out.push_back({f, x, t});
    }
  }
  return out;
}

/// n triples with f drawn from `names`, x uniform in the domain, t
/// log-uniform in [t_lo, t_hi].
inline std::vector<Triple> sample_triples(const ConvexDomain& dom, std::span<const std::string> names,
                                          std::size_t n, double t_lo, double t_hi, std::uint64_t seed) {
  if (names.empty()) throw std::invalid_argument("sample_triples: no functions");
  const std::vector<Point> xs = sample_uniform(dom, n, seed);
  PathRng rng(splitmix64_mix(seed ^ 0x7A1B2C3D4E5F6071ULL), 1);
  std::vector<Triple> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto which = std::min(names.size() - 1,
                                static_cast<std::size_t>(rng.uniform() * static_cast<double>(names.size())));
    const double t = t_lo * std::pow(t_hi / t_lo, rng.uniform());
    out.push_back({make_test_function(names[which], dom), xs[i], t});
  }
  return out;
}

namespace detail {

inline void require_gradient(const TestFunction& f, const char* what) {
  if (!f.has_gradient()) {
    throw PreconditionError(std::string(what) + ": '" + f.name + "' has no analytic gradient");
  }
}

inline std::string triple_label(const Triple& c) {
  std::ostringstream os;
  os << "f=" << c.f.name << " x=" << describe(c.x) << " t=" << c.t;
  return os.str();
}

inline double float_slack(double scale) { return 1e-12 * std::max(1.0, std::abs(scale)); }

}  // namespace detail

/// |grad P0_t f|(x) <= P0_t |grad f|(x), t in process time.
inline InequalityReport check_gradient_commutation(const ConvexDomain& dom, std::span<const Triple> cases,
                                                   const PathParams& params, double fd_step = 0.0) {
  if (fd_step == 0.0) fd_step = default_fd_step(dom);
  InequalityReport r;
  r.test_name = "gradient_commutation";
  for (const Triple& c : cases) {
    detail::require_gradient(c.f, "check_gradient_commutation");
    const PointProbe p = probe_point0(dom, c.f, c.x, c.t, fd_step, params);
    const auto [mag, mag_se] = magnitude_with_error(p.gradient.vector, p.gradient.std_error);
    r.add({detail::triple_label(c), mag, p.abs_grad.mean, mag_se, p.abs_grad.std_error,
           detail::float_slack(p.abs_grad.mean)});
  }
  return r;
}

/// t |grad P0_t f|^2 <= P0_t f^2 - (P0_t f)^2 from one coupled ensemble.
inline InequalityReport check_variance_bound(const ConvexDomain& dom, std::span<const Triple> cases,
                                             const PathParams& params, double fd_step = 0.0) {
  if (fd_step == 0.0) fd_step = default_fd_step(dom);
  InequalityReport r;
  r.test_name = "variance_bound";
  for (const Triple& c : cases) {
    detail::require_gradient(c.f, "check_variance_bound");
    const PointProbe p = probe_point0(dom, c.f, c.x, c.t, fd_step, params);
    const auto [mag, mag_se] = magnitude_with_error(p.gradient.vector, p.gradient.std_error);
    const double lhs = c.t * mag * mag;
    const double lhs_se = 2.0 * c.t * mag * mag_se;
    r.add({detail::triple_label(c), lhs, p.variance.variance, lhs_se, p.variance.std_error,
           detail::float_slack(p.variance.variance)});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Short-time exponent fits

struct ExponentOptions {
  std::vector<Point> probes;      // empty: defaults per fit
  double cell_factor = 0.25;      // histogram cell width / sqrt(2t)
  std::size_t min_steps = 20;     // per run, refines the step at small t
  bool enforce_short_time = true; // t <= 0.1 diam^2; off for negative controls
};

namespace detail {

inline void check_fit_times(const ConvexDomain& dom, std::span<const double> ts,
                            const ExponentOptions& opt, const char* what) {
  if (ts.size() < 5) throw std::invalid_argument(std::string(what) + ": need at least 5 times");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(ts[i] > 0.0)) throw std::invalid_argument(std::string(what) + ": times must be positive");
    if (i > 0 && !(ts[i] > ts[i - 1])) {
      throw std::invalid_argument(std::string(what) + ": times must be increasing");
    }
  }
  const double limit = 0.1 * dom.diameter() * dom.diameter();
  if (opt.enforce_short_time && ts.back() > limit) {
    throw PreconditionError(std::string(what) + ": t = " + std::to_string(ts.back()) +
                            " is outside the short-time window (<= " + std::to_string(limit) + ")");
  }
}

// a boundary point: the projection of the lower corner of the bounding box
inline Point boundary_probe(const ConvexDomain& dom) { return project(dom, dom.bounding_box().lo); }

inline double cell_width(double t, const ExponentOptions& opt) {
  return opt.cell_factor * std::sqrt(2.0 * t);
}

}  // namespace detail

/// Regresses log max_x p_t(x, x) on log t, the kernel read off the histogram
/// cell centered at each probe. Cells scale with sqrt(t), so the binning
/// bias is the same at every t and does not tilt the slope.
inline PowerLawFit fit_ondiagonal_exponent(const ConvexDomain& dom, std::span<const double> t_list,
                                           const PathParams& params, ExponentOptions opt = {}) {
  detail::check_fit_times(dom, t_list, opt, "fit_ondiagonal_exponent");
  if (opt.probes.empty()) opt.probes = {dom.center()};
  std::vector<double> vals, ses;
  for (double t : t_list) {
    const PathParams p = params_for_horizon(params, 2.0 * t, opt.min_steps);
    double best = 0.0, best_se = 0.0;
    for (const Point& x : opt.probes) {
      auto grid = std::make_shared<const DomainGrid>(
          dom, GridSpec::anchored(dom, detail::cell_width(t, opt), x));
      const KernelEstimate k = estimate_kernel(dom, x, t, grid, p);
      const std::size_t c = grid->cell_of(x);
      if (k.density[c] > best) {
        best = k.density[c];
        best_se = k.std_error[c];
      }
    }
    vals.push_back(best);
    ses.push_back(best_se);
  }
  return fit_power_law(t_list, vals, ses);
}

/// Regresses log sup |grad_x p_t(x, y)| on log t, the sup over probe
/// sources y and interior cells x of the smoothed histogram. Default probes
/// are the center and one boundary point (where reflection doubles the
/// gradient).
inline PowerLawFit fit_gradient_exponent(const ConvexDomain& dom, std::span<const double> t_list,
                                         const PathParams& params, ExponentOptions opt = {}) {
  detail::check_fit_times(dom, t_list, opt, "fit_gradient_exponent");
  if (opt.probes.empty()) opt.probes = {dom.center(), detail::boundary_probe(dom)};
  std::vector<double> vals, ses;
  for (double t : t_list) {
    const PathParams p = params_for_horizon(params, 2.0 * t, opt.min_steps);
    KernelGradientSup best;
    for (const Point& y : opt.probes) {
      auto grid = std::make_shared<const DomainGrid>(
          dom, GridSpec::anchored(dom, detail::cell_width(t, opt), y));
      const Point one[] = {y};
      const KernelGradientSup s = kernel_gradient_sup(dom, t, one, grid, p);
      if (s.value > best.value) best = s;
    }
    vals.push_back(best.value);
    ses.push_back(best.std_error);
  }
  return fit_power_law(t_list, vals, ses);
}

// ---------------------------------------------------------------------------
// Gaussian tail of the kernel gradient

struct TailPoint {
  Point x;
  Point y;
  double u = 0.0;          // rho^2 / t
  double log_value = 0.0;  // log |grad p| + (d+1)/2 log t
  double log_se = 0.0;
  double residual = 0.0;
  double noise = 0.0;
  bool pass = true;
};

struct TailFit {
  double fitted_c = 0.0;
  double fitted_log_C = 0.0;
  std::vector<double> residuals;
  std::vector<TailPoint> points;
  double residual_se = 0.0;  // regression residual standard error
  std::size_t n_excluded = 0;  // pairs outside the window or with zero estimate
  bool informative = false;    // enough pairs to fit
  bool pass = false;
};

/// Pairs (x, y) with x = y + rho e_1, rho^2 / t spread over [1, 10], kept
/// only when x lies in the domain.
inline std::vector<std::pair<Point, Point>> tail_pairs(const ConvexDomain& dom, const Point& y,
                                                       double t, std::size_t n) {
  std::vector<std::pair<Point, Point>> out;
  const Point e = Point::unit(dom.dim(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 1.0 + 9.0 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(1, n - 1));
    for (double sgn : {1.0, -1.0}) {
      const Point x = y + e * (sgn * std::sqrt(u * t));
      if (contains(dom, x)) out.emplace_back(x, y);
    }
  }
  return out;
}

/// Least-squares fit of log |grad p_t(x, y)| + (d+1)/2 log t = log C - u / c
/// over the window u = rho^2 / t in [1, 10]. Each pair is read at the center
/// of its histogram cell. A pair passes when its residual is at most twice
/// its noise, the noise combining the Monte Carlo error of the log estimate
/// with the regression's residual standard error.
inline TailFit check_gaussian_tail(const ConvexDomain& dom, double t,
                                   std::span<const std::pair<Point, Point>> pairs,
                                   const PathParams& params, double cell_factor = 0.125) {
  const double d = static_cast<double>(dom.dim());
  const PathParams p = params_for_horizon(params, 2.0 * t, 20);
  TailFit fit;
  std::vector<std::pair<Point, std::vector<Point>>> by_source;
  for (const auto& [x, y] : pairs) {
    auto it = std::find_if(by_source.begin(), by_source.end(), [&](const auto& s) { return s.first == y; });
    if (it == by_source.end()) {
      by_source.push_back({y, {}});
      it = by_source.end() - 1;
    }
    it->second.push_back(x);
  }
  for (const auto& [y, xs] : by_source) {
    auto grid = std::make_shared<const DomainGrid>(
        dom, GridSpec::anchored(dom, cell_factor * std::sqrt(2.0 * t), y));
    const KernelEstimate k = estimate_kernel(dom, y, t, grid, p);
    const KernelGradientField g = kernel_gradient_field(k);
    std::vector<std::size_t> used;
    for (const Point& x : xs) {
      const std::size_t c = grid->cell_of(x);
      if (c != DomainGrid::npos && std::find(used.begin(), used.end(), c) != used.end()) continue;
      used.push_back(c);
      const Point xc = c == DomainGrid::npos ? x : grid->cell_center(c);
      const double u = norm2(xc - y) / t;
      if (c == DomainGrid::npos || u < 1.0 || u > 10.0) {
        ++fit.n_excluded;
        continue;
      }
      const auto [mag, se] = magnitude_with_error(g.gradient[c], g.std_error[c]);
      if (!(mag > 0.0)) {
        ++fit.n_excluded;
        continue;
      }
      TailPoint tp;
      tp.x = xc;
      tp.y = y;
      tp.u = u;
      tp.log_value = std::log(mag) + 0.5 * (d + 1.0) * std::log(t);
      tp.log_se = se / mag;
      fit.points.push_back(tp);
    }
  }
  if (fit.points.size() < 4) return fit;
  fit.informative = true;
  std::vector<double> xu, yv;
  for (const auto& tp : fit.points) {
    xu.push_back(-tp.u);
    yv.push_back(tp.log_value);
  }
  const LineFit lf = fit_line(xu, yv);
  fit.fitted_c = lf.slope > 0.0 ? 1.0 / lf.slope : std::numeric_limits<double>::infinity();
  fit.fitted_log_C = lf.intercept;
  double ssr = 0.0;
  for (double r : lf.residuals) ssr += r * r;
  fit.residual_se = std::sqrt(ssr / static_cast<double>(lf.residuals.size() - 2));
  fit.residuals = lf.residuals;
  fit.pass = lf.slope > 0.0;
  for (std::size_t i = 0; i < fit.points.size(); ++i) {
    TailPoint& tp = fit.points[i];
    tp.residual = lf.residuals[i];
    tp.noise = std::hypot(tp.log_se, fit.residual_se);
    tp.pass = tp.residual <= 2.0 * tp.noise;
    fit.pass = fit.pass && tp.pass;
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Exponential moments of the boundary local time

struct LocalTimeCell {
  Point start;
  double sigma = 0.0;
  double s = 0.0;  // process time
  McEstimate moment;  // E exp(sigma l_s)
  bool reliable = true;  // relative stderr <= 20%
};

struct LocalTimeReport {
  InequalityReport monotonicity;  // E at the smaller argument <= E at the larger
  std::vector<LocalTimeCell> cells;
  double c_fit = 0.0;  // smallest c with E <= exp(c (s + sqrt s)) over the grid
  bool all_finite = true;
  bool all_reliable = true;

  [[nodiscard]] bool passed() const {
    return monotonicity.passed() && all_finite && std::isfinite(c_fit);
  }
};

/// One pass per start point to the largest s, checkpointing the local time.
inline LocalTimeReport check_local_time_moment(const ConvexDomain& dom, std::span<const double> sigmas,
                                               std::span<const double> s_list,
                                               std::span<const Point> starts,
                                               const PathParams& params) {
  if (s_list.empty() || sigmas.empty() || starts.empty()) {
    throw std::invalid_argument("check_local_time_moment: empty grid");
  }
  std::vector<double> ss(s_list.begin(), s_list.end());
  std::sort(ss.begin(), ss.end());
  if (!(ss.front() > 0.0) || ss.back() > 1.0) {
    throw PreconditionError("check_local_time_moment: s must lie in (0, 1]");
  }
  for (double sg : sigmas) {
    if (sg < 0.0) throw PreconditionError("check_local_time_moment: sigma must be nonnegative");
  }
  const double h = params.step_h;
  std::vector<std::size_t> checkpoints;
  for (double s : ss) checkpoints.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(s / h))));

  LocalTimeReport rep;
  rep.monotonicity.test_name = "local_time_monotonicity";
  const std::size_t m = params.n_paths, ns = ss.size();
  for (const Point& x0 : starts) {
    require_member(dom, x0, "check_local_time_moment");
    std::vector<double> lt(m * ns);
    parallel_for(m, params.workers, [&](std::size_t i) {
      const Point start[] = {x0};
      CoupledWalker w(dom, start, h, params.scheme, params.master_seed, i);
      for (std::size_t j = 0; j < ns; ++j) {
        w.advance(checkpoints[j] - w.steps_taken());
        lt[i * ns + j] = w.local_times()[0];
      }
    });
    std::vector<double> vals(m);
    std::vector<std::vector<McEstimate>> grid(sigmas.size(), std::vector<McEstimate>(ns));
    for (std::size_t a = 0; a < sigmas.size(); ++a) {
      for (std::size_t j = 0; j < ns; ++j) {
        for (std::size_t i = 0; i < m; ++i) vals[i] = std::exp(sigmas[a] * lt[i * ns + j]);
        const McEstimate e = summarize(vals);
        grid[a][j] = e;
        LocalTimeCell cell{x0, sigmas[a], ss[j], e, true};
        cell.reliable = e.mean > 0.0 && e.std_error <= 0.2 * e.mean;
        rep.all_reliable = rep.all_reliable && cell.reliable;
        rep.all_finite = rep.all_finite && std::isfinite(e.mean) && std::isfinite(e.std_error);
        const double s = ss[j];
        rep.c_fit = std::max(rep.c_fit, std::log(e.mean) / (s + std::sqrt(s)));
        rep.cells.push_back(cell);
      }
    }
    auto label = [&](std::size_t a, std::size_t j) {
      std::ostringstream os;
      os << "start=" << describe(x0) << " sigma=" << sigmas[a] << " s=" << ss[j];
      return os.str();
    };
    for (std::size_t a = 0; a < sigmas.size(); ++a) {
      for (std::size_t j = 0; j + 1 < ns; ++j) {
        const McEstimate &lo = grid[a][j], &hi = grid[a][j + 1];
        rep.monotonicity.add({label(a, j) + " vs s=" + std::to_string(ss[j + 1]), lo.mean, hi.mean,
                              lo.std_error, hi.std_error, detail::float_slack(hi.mean)});
      }
    }
    std::vector<std::size_t> order(sigmas.size());
    for (std::size_t a = 0; a < order.size(); ++a) order[a] = a;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sigmas[a] < sigmas[b]; });
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      for (std::size_t j = 0; j < ns; ++j) {
        const McEstimate &lo = grid[order[k]][j], &hi = grid[order[k + 1]][j];
        rep.monotonicity.add({label(order[k], j) + " vs sigma=" + std::to_string(sigmas[order[k + 1]]),
                              lo.mean, hi.mean, lo.std_error, hi.std_error,
                              detail::float_slack(hi.mean)});
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Spectral decay in L2

struct SpectralReport {
  InequalityReport report;
  std::vector<L2Point> curve;
  double norm0 = 0.0;  // quadrature norm of f
  double lambda1 = 0.0;
};

inline double l2_norm(const Quadrature& q, const TestFunction& f) {
  return std::sqrt(q.integrate([&](const Point& x) { return f(x) * f(x); }));
}

/// ||P_t f||_2 <= exp(-lambda1 t) ||f||_2 at each t (semigroup time).
inline SpectralReport check_spectral_decay(const ConvexDomain& dom, const TestFunction& f,
                                           std::span<const double> t_list, double lambda1,
                                           const Quadrature& quad, const PathParams& params) {
  if (!f.mean_zero) throw PreconditionError("check_spectral_decay: f must have zero mean");
  if (!(lambda1 > 0.0)) throw std::invalid_argument("check_spectral_decay: lambda1 must be positive");
  SpectralReport out;
  out.lambda1 = lambda1;
  out.norm0 = l2_norm(quad, f);
  out.curve = l2_norm_curve(dom, f, t_list, quad, params);
  out.report.test_name = "spectral_decay";
  for (const L2Point& c : out.curve) {
    const double rhs = std::exp(-lambda1 * c.t) * out.norm0;
    out.report.add({"f=" + f.name + " t=" + std::to_string(c.t), c.norm, rhs, c.std_error, 0.0,
                    detail::float_slack(rhs)});
  }
  return out;
}

/// lambda1 from the late-time slope of log ||P_t f||_2.
struct Lambda1Fit {
  double lambda1 = 0.0;
  double r_squared = 0.0;
  std::vector<L2Point> curve;
};

inline Lambda1Fit fit_lambda1(const ConvexDomain& dom, const TestFunction& f, std::span<const double> t_list,
                              const Quadrature& quad, const PathParams& params) {
  Lambda1Fit out;
  out.curve = l2_norm_curve(dom, f, t_list, quad, params);
  std::vector<double> ts, ls;
  for (const L2Point& c : out.curve) {
    if (c.norm > 0.0) {
      ts.push_back(c.t);
      ls.push_back(std::log(c.norm));
    }
  }
  if (ts.size() < 2) throw std::runtime_error("fit_lambda1: curve vanished");
  const LineFit lf = fit_line(ts, ls);
  out.lambda1 = -lf.slope;
  out.r_squared = lf.r_squared;
  return out;
}

/// Default window for fit_lambda1: t in [0.1, 0.3] diam^2. On convex domains
/// lambda1 >= pi^2 / diam^2, so by 0.3 diam^2 the norm is down ~e^-3 and
/// still above Monte Carlo noise; later windows mostly fit noise.
inline std::vector<double> lambda1_window(const ConvexDomain& dom, std::size_t n = 5) {
  const double d2 = dom.diameter() * dom.diameter();
  std::vector<double> ts(n);
  for (std::size_t i = 0; i < n; ++i) ts[i] = d2 * (0.1 + 0.2 * static_cast<double>(i) / static_cast<double>(n - 1));
  return ts;
}

}  // namespace rbmlab
