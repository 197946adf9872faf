#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rbmlab/geometry.hpp"
#include "rbmlab/grid.hpp"
#include "rbmlab/rbm.hpp"
#include "rbmlab/semigroup.hpp"
#include "rbmlab/stats.hpp"
#include "rbmlab/test_functions.hpp"

// Neumann Green operator u = -int_0^inf P_t f dt on mean-zero f, and the
// Riesz transform (2/sqrt(pi)) int_0^inf grad P_s f s^{-1/2} ds. Both
// integrals are accumulated along each path at time nodes that sit exactly
// on the step grid, so one ensemble yields the whole quadrature and its
// standard error.

namespace rbmlab {

struct GreenParams {
  double t_max = 0.5;  // semigroup time
  std::size_t n_quad = 64;
  double lambda1_hat = std::numbers::pi * std::numbers::pi;

  void validate() const {
    if (!(t_max > 0.0) || !(lambda1_hat > 0.0) || n_quad < 2) {
      throw std::invalid_argument("GreenParams: t_max, lambda1_hat must be positive and n_quad >= 2");
    }
    if (std::exp(-lambda1_hat * t_max) > 0.01) {
      throw PreconditionError("GreenParams: exp(-lambda1_hat * t_max) = " +
                              std::to_string(std::exp(-lambda1_hat * t_max)) + " exceeds 0.01");
    }
  }

  /// Smallest horizon meeting the truncation invariant, with a 15% margin.
  static GreenParams for_lambda(double lambda1, std::size_t n_quad = 64) {
    return {1.15 * std::log(100.0) / lambda1, n_quad, lambda1};
  }
};

struct GreenEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double truncation_bound = 0.0;
};

/// max |f| over grid-quadrature nodes.
inline double sup_norm(const ConvexDomain& dom, const std::function<double(const Point&)>& f) {
  const std::size_t n = dom.dim() == 1 ? 2000 : dom.dim() == 2 ? 120 : 24;
  const Quadrature q = Quadrature::on(dom, n);
  double m = 0.0;
  for (const Point& x : q.nodes) m = std::max(m, std::abs(f(x)));
  return m;
}

inline double lq_norm(const Quadrature& q, const TestFunction& f, double p) {
  return std::pow(q.integrate([&](const Point& x) { return std::pow(std::abs(f(x)), p); }), 1.0 / p);
}

namespace detail {

struct TimeNodes {
  std::vector<std::size_t> steps;  // process steps, increasing, first is 0
  std::vector<double> weights;     // trapezoid weights in the integration variable
};

// Trapezoid rule on the nodes var(k) for the given distinct step counts.
template <class Var>
inline TimeNodes trapezoid(std::vector<std::size_t> steps, Var var) {
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  TimeNodes tn;
  tn.steps = steps;
  tn.weights.assign(steps.size(), 0.0);
  for (std::size_t j = 0; j + 1 < steps.size(); ++j) {
    const double dv = 0.5 * (var(steps[j + 1]) - var(steps[j]));
    tn.weights[j] += dv;
    tn.weights[j + 1] += dv;
  }
  return tn;
}

// n log-spaced semigroup times in [h/2, t_max] snapped to the step grid,
// plus t = 0. Process step k is semigroup time k h / 2.
inline TimeNodes green_nodes(std::size_t n_total, double h, std::size_t n) {
  std::vector<std::size_t> steps{0, n_total};
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    const double k = std::pow(static_cast<double>(n_total), frac);
    steps.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(k)), 1, n_total));
  }
  return trapezoid(std::move(steps), [h](std::size_t k) { return 0.5 * h * static_cast<double>(k); });
}

// Calls fn(path, node, walker) at every node of every path.
template <class Fn>
void walk_nodes(const ConvexDomain& dom, std::span<const Point> starts, const PathParams& p,
                const TimeNodes& nodes, Fn&& fn) {
  parallel_for(p.n_paths, p.workers, [&](std::size_t i) {
    CoupledWalker w(dom, starts, p.step_h, p.scheme, p.master_seed, i);
    for (std::size_t j = 0; j < nodes.steps.size(); ++j) {
      w.advance(nodes.steps[j] - w.steps_taken());
      fn(i, j, w);
    }
  });
}

inline void require_mean_zero(const TestFunction& f, const char* what) {
  if (!f.mean_zero) throw PreconditionError(std::string(what) + ": f must have zero mean");
}

inline GradientEstimate gradient_from_samples(const std::vector<double>& vals, std::size_t m,
                                              std::size_t d, double scale, double fd_step,
                                              std::vector<bool> one_sided) {
  GradientEstimate g;
  g.vector = Point(d);
  g.std_error = Point(d);
  g.fd_step = fd_step;
  g.one_sided = std::move(one_sided);
  std::vector<double> comp(m);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < m; ++i) comp[i] = scale * vals[i * d + k];
    const McEstimate e = summarize(comp);
    g.vector[k] = e.mean;
    g.std_error[k] = e.std_error;
  }
  return g;
}

}  // namespace detail

inline GreenEstimate green_apply(const ConvexDomain& dom, const TestFunction& f, const Point& x,
                                 const GreenParams& gp, const PathParams& params) {
  detail::require_mean_zero(f, "green_apply");
  gp.validate();
  require_member(dom, x, "green_apply");
  const PathParams p = params.with_horizon(2.0 * gp.t_max);
  const detail::TimeNodes nodes = detail::green_nodes(p.n_steps(), p.step_h, gp.n_quad);
  std::vector<double> acc(p.n_paths, 0.0);
  const Point start[] = {x};
  detail::walk_nodes(dom, start, p, nodes, [&](std::size_t i, std::size_t j, const CoupledWalker& w) {
    acc[i] -= nodes.weights[j] * f(w.positions()[0]);
  });
  const McEstimate e = summarize(acc);
  return {e.mean, e.std_error,
          std::exp(-gp.lambda1_hat * gp.t_max) * sup_norm(dom, f.value) / gp.lambda1_hat};
}

/// Coupled finite differences of green_apply, one ensemble for all nodes.
inline GradientEstimate green_gradient(const ConvexDomain& dom, const TestFunction& f, const Point& x,
                                       const GreenParams& gp, const PathParams& params,
                                       double fd_step = 0.0) {
  detail::require_mean_zero(f, "green_gradient");
  gp.validate();
  require_member(dom, x, "green_gradient");
  if (fd_step == 0.0) fd_step = default_fd_step(dom);
  const FdStencil st = FdStencil::build(dom, x, fd_step);
  const std::size_t d = st.dim();
  const PathParams p = params.with_horizon(2.0 * gp.t_max);
  const detail::TimeNodes nodes = detail::green_nodes(p.n_steps(), p.step_h, gp.n_quad);
  std::vector<double> acc(p.n_paths * d, 0.0);
  detail::walk_nodes(dom, st.starts, p, nodes, [&](std::size_t i, std::size_t j, const CoupledWalker& w) {
    const auto& pos = w.positions();
    for (std::size_t k = 0; k < d; ++k) {
      acc[i * d + k] -= nodes.weights[j] * (f(pos[st.plus[k]]) - f(pos[st.minus[k]])) / st.denom[k];
    }
  });
  return detail::gradient_from_samples(acc, p.n_paths, d, 1.0, fd_step, st.one_sided);
}

// ---------------------------------------------------------------------------
// Gradient bound for the Green operator

struct GreenBoundEntry {
  std::string f_name;
  double max_grad = 0.0;
  double max_grad_se = 0.0;
  Point argmax;
  double lq = 0.0;
  double ratio = 0.0;
  double ratio_se = 0.0;
  double truncation_bound = 0.0;
};

struct GreenBoundReport {
  std::vector<GreenBoundEntry> entries;
  double q = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  bool pass = false;  // all ratios finite and within a factor 10 of each other
};

/// Ratio max_probes |grad u| / (|Omega|^{(q-d)/(qd)} ||f||_q) for each f.
inline GreenBoundReport check_green_gradient_bound(const ConvexDomain& dom, std::span<const TestFunction> fs,
                                                   double q, std::span<const Point> probes,
                                                   const GreenParams& gp, const PathParams& params,
                                                   double fd_step = 0.0) {
  const double d = static_cast<double>(dom.dim());
  if (!(q > d)) throw PreconditionError("check_green_gradient_bound: q must exceed the dimension");
  if (fs.empty() || probes.empty()) throw std::invalid_argument("check_green_gradient_bound: empty input");
  const Quadrature quad = Quadrature::on(dom, dom.dim() == 1 ? 2000 : dom.dim() == 2 ? 200 : 30);
  const double vol_factor = std::pow(dom.volume(), (q - d) / (q * d));
  GreenBoundReport rep;
  rep.q = q;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  bool finite = true;
  for (const TestFunction& f : fs) {
    GreenBoundEntry e;
    e.f_name = f.name;
    for (const Point& x : probes) {
      const GradientEstimate g = green_gradient(dom, f, x, gp, params, fd_step);
      const auto [mag, se] = magnitude_with_error(g.vector, g.std_error);
      if (mag >= e.max_grad) {
        e.max_grad = mag;
        e.max_grad_se = se;
        e.argmax = x;
      }
    }
    e.lq = lq_norm(quad, f, q);
    e.truncation_bound = std::exp(-gp.lambda1_hat * gp.t_max) * sup_norm(dom, f.value) / gp.lambda1_hat;
    e.ratio = e.max_grad / (vol_factor * e.lq);
    e.ratio_se = e.max_grad_se / (vol_factor * e.lq);
    finite = finite && std::isfinite(e.ratio) && e.lq > 0.0;
    rep.min_ratio = std::min(rep.min_ratio, e.ratio);
    rep.max_ratio = std::max(rep.max_ratio, e.ratio);
    rep.entries.push_back(e);
  }
  rep.pass = finite && rep.min_ratio > 0.0 && rep.max_ratio <= 10.0 * rep.min_ratio;
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient of the Green kernel

struct GreenKernelPoint {
  Point x;
  double rho = 0.0;
  double value = 0.0;  // |grad_x G(x, y)|
  double std_error = 0.0;
};

struct GreenKernelProbe {
  std::vector<GreenKernelPoint> points;
  double slope = 0.0;  // of log |grad G| against log rho
  double r_squared = 0.0;
  bool slope_ok = false;  // slope >= -(d-1) - 0.3
  bool decreasing = false;  // nonincreasing in rho within 2 sigma
};

/// |int_0^{t_max} grad_x p_t(x, y) dt| read off an occupation histogram of
/// paths started at y (cells of width `cell_width`, smoothed and
/// differenced as for the kernel gradient).
inline GreenKernelProbe green_kernel_gradient_probe(const ConvexDomain& dom, const Point& y,
                                                    std::span<const Point> xs, const GreenParams& gp,
                                                    const PathParams& params, double cell_width = 0.0) {
  gp.validate();
  require_member(dom, y, "green_kernel_gradient_probe");
  if (cell_width == 0.0) cell_width = 0.02 * dom.diameter();
  const std::size_t d = dom.dim();
  const DomainGrid grid(dom, GridSpec::anchored(dom, cell_width, y));
  double w_max = 0.0;
  for (std::size_t k = 0; k < d; ++k) w_max = std::max(w_max, grid.width(k));

  // sparse linear functional per (probe, axis): cell -> coefficient
  std::vector<std::vector<std::pair<std::size_t, double>>> by_cell(grid.size());
  auto add_smoothed = [&](std::size_t slot, std::size_t c, double coef) {
    double vol = 0.0;
    for (std::size_t b : grid.block(c)) vol += grid.volume(b);
    for (std::size_t b : grid.block(c)) {
      if (grid.volume(b) > 0.0) by_cell[b].emplace_back(slot, coef / vol);
    }
  };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require_member(dom, xs[i], "green_kernel_gradient_probe");
    if (distance(xs[i], y) < 2.0 * w_max) {
      throw PreconditionError("green_kernel_gradient_probe: probe " + to_string(xs[i]) +
                              " is within two cells of the source");
    }
    const std::size_t c = grid.cell_of(xs[i]);
    for (std::size_t k = 0; k < d; ++k) {
      std::size_t hi = grid.neighbor(c, k, +1), lo = grid.neighbor(c, k, -1);
      double span = 2.0 * grid.width(k);
      if (hi == DomainGrid::npos || grid.volume(hi) <= 0.0) {
        hi = c;
        span = grid.width(k);
      }
      if (lo == DomainGrid::npos || grid.volume(lo) <= 0.0) {
        lo = c;
        span = hi == c ? 0.0 : grid.width(k);
      }
      if (span == 0.0) continue;
      add_smoothed(i * d + k, hi, 1.0 / span);
      add_smoothed(i * d + k, lo, -1.0 / span);
    }
  }

  const PathParams p = params.with_horizon(2.0 * gp.t_max);
  const detail::TimeNodes nodes = detail::green_nodes(p.n_steps(), p.step_h, gp.n_quad);
  const std::size_t width = xs.size() * d;
  std::vector<double> acc(p.n_paths * width, 0.0);
  const Point start[] = {y};
  detail::walk_nodes(dom, start, p, nodes, [&](std::size_t i, std::size_t j, const CoupledWalker& w) {
    const std::size_t c = grid.cell_of(w.positions()[0]);
    if (c == DomainGrid::npos) return;
    for (const auto& [slot, coef] : by_cell[c]) acc[i * width + slot] -= nodes.weights[j] * coef;
  });

  GreenKernelProbe out;
  std::vector<double> comp(p.n_paths), lr, lv;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Point g(d), se(d);
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t m = 0; m < p.n_paths; ++m) comp[m] = acc[m * width + i * d + k];
      const McEstimate e = summarize(comp);
      g[k] = e.mean;
      se[k] = e.std_error;
    }
    const auto [mag, mse] = magnitude_with_error(g, se);
    out.points.push_back({xs[i], distance(xs[i], y), mag, mse});
    if (mag > 0.0) {
      lr.push_back(std::log(distance(xs[i], y)));
      lv.push_back(std::log(mag));
    }
  }
  std::sort(out.points.begin(), out.points.end(), [](const auto& a, const auto& b) { return a.rho < b.rho; });
  out.decreasing = true;
  for (std::size_t i = 0; i + 1 < out.points.size(); ++i) {
    const auto &a = out.points[i], &b = out.points[i + 1];
    if (b.value > a.value + 2.0 * (a.std_error + b.std_error)) out.decreasing = false;
  }
  if (lr.size() >= 2) {
    const LineFit lf = fit_line(lr, lv);
    out.slope = lf.slope;
    out.r_squared = lf.r_squared;
    out.slope_ok = lf.slope >= -(static_cast<double>(d) - 1.0) - 0.3;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Riesz transform

struct RieszEstimate {
  Point value;
  Point std_error;
  double u_min = 0.0;
  double remainder_bound = 0.0;   // u_min-cutoff piece, (4/sqrt(pi)) u_min ||grad f||_inf
  double truncation_bound = 0.0;  // tail past sqrt(t_max), assuming decay at rate lambda1_hat
};

inline double gradient_sup_norm(const ConvexDomain& dom, const TestFunction& f) {
  return sup_norm(dom, [&](const Point& x) { return grad_norm(f, x); });
}

/// Tf(x) = (4/sqrt(pi)) int_{u_min}^{sqrt(t_max)} grad P_{u^2} f(x) du after
/// s = u^2. Nodes u = sqrt(k h / 2) on the step grid, plus u_min read at
/// time zero.
inline RieszEstimate riesz_apply(const ConvexDomain& dom, const TestFunction& f, const Point& x,
                                 const GreenParams& gp, const PathParams& params, double fd_step = 0.0) {
  detail::require_mean_zero(f, "riesz_apply");
  gp.validate();
  require_member(dom, x, "riesz_apply");
  if (fd_step == 0.0) fd_step = default_fd_step(dom);
  const double u_min = 0.01 * std::sqrt(fd_step);
  const FdStencil st = FdStencil::build(dom, x, fd_step);
  const std::size_t d = st.dim();
  const PathParams p = params.with_horizon(2.0 * gp.t_max);
  const std::size_t n_total = p.n_steps();
  const double h = p.step_h;
  auto u_of = [&](std::size_t k) { return k == 0 ? u_min : std::sqrt(0.5 * h * static_cast<double>(k)); };

  std::vector<std::size_t> steps{0, 1, n_total};
  const double u_lo = u_of(1), u_hi = u_of(n_total);
  for (std::size_t i = 0; i < gp.n_quad; ++i) {
    const double u = u_lo * std::pow(u_hi / u_lo, static_cast<double>(i) / static_cast<double>(gp.n_quad - 1));
    steps.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(2.0 * u * u / h)), 1, n_total));
  }
  const detail::TimeNodes nodes = detail::trapezoid(std::move(steps), u_of);

  std::vector<double> acc(p.n_paths * d, 0.0);
  detail::walk_nodes(dom, st.starts, p, nodes, [&](std::size_t i, std::size_t j, const CoupledWalker& w) {
    const auto& pos = w.positions();
    for (std::size_t k = 0; k < d; ++k) {
      acc[i * d + k] += nodes.weights[j] * (f(pos[st.plus[k]]) - f(pos[st.minus[k]])) / st.denom[k];
    }
  });
  const double c = 4.0 / std::sqrt(std::numbers::pi);
  const GradientEstimate g = detail::gradient_from_samples(acc, p.n_paths, d, c, fd_step, st.one_sided);
  RieszEstimate r;
  r.value = g.vector;
  r.std_error = g.std_error;
  r.u_min = u_min;
  const double gsup = gradient_sup_norm(dom, f);
  r.remainder_bound = c * u_min * gsup;
  r.truncation_bound = c * gsup * 0.5 * std::sqrt(std::numbers::pi / gp.lambda1_hat) *
                       std::erfc(std::sqrt(gp.lambda1_hat) * u_hi);
  return r;
}

/// ||Tf||_p / ||f||_p by quadrature over the nodes of `quad`.
struct RieszRatio {
  double ratio = 0.0;
  double std_error = 0.0;
};

inline RieszRatio riesz_lp_ratio(const ConvexDomain& dom, const TestFunction& f, double p_exp,
                                 const Quadrature& quad, const GreenParams& gp, const PathParams& params,
                                 double fd_step = 0.0) {
  if (!(p_exp >= 1.0)) throw std::invalid_argument("riesz_lp_ratio: p must be >= 1");
  double num = 0.0, var = 0.0;
  for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
    const RieszEstimate r = riesz_apply(dom, f, quad.nodes[i], gp, params, fd_step);
    const auto [mag, se] = magnitude_with_error(r.value, r.std_error);
    num += quad.weights[i] * std::pow(mag, p_exp);
    const double dterm = quad.weights[i] * p_exp * std::pow(mag, p_exp - 1.0) * se;
    var += dterm * dterm;
  }
  const double tf = std::pow(num, 1.0 / p_exp);
  const double fn = lq_norm(quad, f, p_exp);
  // d(num^{1/p}) = (1/p) num^{1/p - 1} d num
  const double tf_se = num > 0.0 ? tf / (p_exp * num) * std::sqrt(var) : 0.0;
  return {tf / fn, tf_se / fn};
}

}  // namespace rbmlab
