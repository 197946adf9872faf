#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rbmlab/geometry.hpp"
#include "rbmlab/grid.hpp"
#include "rbmlab/parallel.hpp"
#include "rbmlab/rbm.hpp"
#include "rbmlab/stats.hpp"
#include "rbmlab/test_functions.hpp"

// Monte Carlo estimators for the Neumann semigroup. Time convention: the
// semigroup generated by the Laplacian at time t is the reflecting Brownian
// motion (generator Laplacian / 2) at process time 2t. Functions with a
// trailing 0 take process time; the others take semigroup time.

namespace rbmlab {

/// Runs every path of `params` from the coupled `starts` up to process time
/// `horizon`, calling fn(path_index, walker) at the end of each path. fn is
/// called concurrently and must only write to slot path_index of its output.
template <class Fn>
void for_each_path(const ConvexDomain& dom, std::span<const Point> starts, double horizon,
                   const PathParams& params, Fn&& fn) {
  const bool moving = horizon > 0.0;
  const PathParams p = moving ? params.with_horizon(horizon) : params;
  const std::size_t n_steps = moving ? p.n_steps() : 0;
  parallel_for(p.n_paths, p.workers, [&](std::size_t i) {
    CoupledWalker walker(dom, starts, p.step_h, p.scheme, p.master_seed, i);
    walker.advance(n_steps);
    fn(i, walker);
  });
}

inline double default_fd_step(const ConvexDomain& dom) { return 0.02 * dom.diameter(); }

inline McEstimate estimate_semigroup0(const ConvexDomain& dom, const TestFunction& f,
                                      const Point& x, double s, const PathParams& params) {
  require_member(dom, x, "estimate_semigroup0");
  if (s < 0.0) throw std::invalid_argument("estimate_semigroup0: negative time");
  std::vector<double> values(params.n_paths);
  const Point start[] = {x};
  for_each_path(dom, start, s, params,
                [&](std::size_t i, const CoupledWalker& w) { values[i] = f(w.positions()[0]); });
  return summarize(values);
}

inline McEstimate estimate_semigroup(const ConvexDomain& dom, const TestFunction& f,
                                     const Point& x, double t, const PathParams& params) {
  return estimate_semigroup0(dom, f, x, 2.0 * t, params);
}

// ---------------------------------------------------------------------------
// Coupled finite differences

struct GradientEstimate {
  Point vector;
  Point std_error;
  double fd_step = 0.0;
  std::vector<bool> one_sided;  // per component: boundary fallback used

  [[nodiscard]] bool any_one_sided() const {
    return std::any_of(one_sided.begin(), one_sided.end(), [](bool b) { return b; });
  }
};

/// Difference stencil: starts[0] is x itself; component k is
/// (f(starts[plus[k]]) - f(starts[minus[k]])) / denom[k].
struct FdStencil {
  std::vector<Point> starts;
  std::vector<std::size_t> plus, minus;
  std::vector<double> denom;
  std::vector<bool> one_sided;

  static FdStencil build(const ConvexDomain& dom, const Point& x, double fd_step) {
    if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be positive");
    FdStencil s;
    s.starts.push_back(x);
    const std::size_t d = dom.dim();
    for (std::size_t k = 0; k < d; ++k) {
      const Point e = Point::unit(d, k);
      const Point hp = x + e * (0.5 * fd_step), hm = x - e * (0.5 * fd_step);
      const Point fp = x + e * fd_step, fm = x - e * fd_step;
      if (contains(dom, hp) && contains(dom, hm)) {
        s.add(hp, hm, fd_step, false);
      } else if (contains(dom, fp)) {
        s.add(fp, std::nullopt, fd_step, true);
      } else if (contains(dom, fm)) {
        s.add(std::nullopt, fm, fd_step, true);
      } else {
        throw PreconditionError("finite-difference stencil does not fit in the domain at " +
                                to_string(x));
      }
    }
    return s;
  }

  [[nodiscard]] std::size_t dim() const noexcept { return plus.size(); }

 private:
  void add(std::optional<Point> p, std::optional<Point> m, double denom_k, bool one) {
    auto slot = [&](std::optional<Point> q) -> std::size_t {
      if (!q) return 0;
      starts.push_back(*q);
      return starts.size() - 1;
    };
    plus.push_back(slot(p));
    minus.push_back(slot(m));
    denom.push_back(denom_k);
    one_sided.push_back(one);
  }
};

/// Everything one coupled ensemble at x yields: P0 f, P0 f^2 - (P0 f)^2,
/// P0 |grad f| and grad P0 f.
struct PointProbe {
  McEstimate value;
  VarianceEstimate variance;
  McEstimate abs_grad;  // only when f has a gradient
  GradientEstimate gradient;
};

inline PointProbe probe_point0(const ConvexDomain& dom, const TestFunction& f, const Point& x,
                               double s, double fd_step, const PathParams& params) {
  require_member(dom, x, "probe_point0");
  const FdStencil st = FdStencil::build(dom, x, fd_step);
  const std::size_t d = st.dim();
  const std::size_t m = params.n_paths;
  const bool with_grad = f.has_gradient();
  std::vector<double> value(m), absg(m), diff(m * d);
  for_each_path(dom, st.starts, s, params, [&](std::size_t i, const CoupledWalker& w) {
    const auto& pos = w.positions();
    std::vector<double> fv(pos.size());
    for (std::size_t j = 0; j < pos.size(); ++j) fv[j] = f(pos[j]);
    value[i] = fv[0];
    if (with_grad) absg[i] = grad_norm(f, pos[0]);
    for (std::size_t k = 0; k < d; ++k) diff[i * d + k] = (fv[st.plus[k]] - fv[st.minus[k]]) / st.denom[k];
  });
  PointProbe out;
  out.value = summarize(value);
  out.variance = sample_variance(value);
  if (with_grad) out.abs_grad = summarize(absg);
  out.gradient.vector = Point(d);
  out.gradient.std_error = Point(d);
  out.gradient.fd_step = fd_step;
  out.gradient.one_sided = st.one_sided;
  std::vector<double> comp(m);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < m; ++i) comp[i] = diff[i * d + k];
    const McEstimate e = summarize(comp);
    out.gradient.vector[k] = e.mean;
    out.gradient.std_error[k] = e.std_error;
  }
  return out;
}

inline GradientEstimate estimate_gradient0(const ConvexDomain& dom, const TestFunction& f,
                                           const Point& x, double s, double fd_step,
                                           const PathParams& params) {
  return probe_point0(dom, f, x, s, fd_step, params).gradient;
}

inline GradientEstimate estimate_gradient(const ConvexDomain& dom, const TestFunction& f,
                                          const Point& x, double t, double fd_step,
                                          const PathParams& params) {
  return estimate_gradient0(dom, f, x, 2.0 * t, fd_step, params);
}

/// |g| and its standard error by the delta method.
inline std::pair<double, double> magnitude_with_error(const Point& g, const Point& se) {
  const double mag = norm(g);
  if (mag == 0.0) return {0.0, norm(se)};
  double var = 0.0;
  for (std::size_t k = 0; k < g.dim(); ++k) var += g[k] * g[k] * se[k] * se[k];
  return {mag, std::sqrt(var) / mag};
}

// ---------------------------------------------------------------------------
// Heat kernel by histogram

struct KernelEstimate {
  double t = 0.0;
  Point source;
  std::shared_ptr<const DomainGrid> grid;
  std::vector<double> density;
  std::vector<double> std_error;
  std::vector<std::size_t> counts;
  std::size_t n_included = 0;  // endpoints that landed in cells of positive volume

  [[nodiscard]] double total_mass() const {
    double s = 0.0;
    for (std::size_t c = 0; c < density.size(); ++c) s += density[c] * grid->volume(c);
    return s;
  }

  [[nodiscard]] double density_at(const Point& x) const {
    const std::size_t c = grid->cell_of(x);
    return c == DomainGrid::npos ? 0.0 : density[c];
  }

  /// Bound on |cell average - p_t(center, x)| for cell c: the midpoint error
  /// w^2/24 |d^2 p| per axis, with the curvature taken from the histogram
  /// second difference plus two of its standard errors. Infinite when a
  /// neighbor along some axis has no volume.
  [[nodiscard]] double binning_bound(std::size_t c) const {
    const DomainGrid& g = *grid;
    double b = 0.0;
    for (std::size_t ax = 0; ax < g.dim(); ++ax) {
      const std::size_t lo = g.neighbor(c, ax, -1), hi = g.neighbor(c, ax, +1);
      if (lo == DomainGrid::npos || hi == DomainGrid::npos || g.volume(lo) <= 0.0 || g.volume(hi) <= 0.0) {
        return std::numeric_limits<double>::infinity();
      }
      const double d2 = density[hi] - 2.0 * density[c] + density[lo];
      const double se = std::sqrt(std_error[hi] * std_error[hi] + 4.0 * std_error[c] * std_error[c] +
                                  std_error[lo] * std_error[lo]);
      b += (std::abs(d2) + 2.0 * se) / 24.0;
    }
    return b;
  }
};

inline KernelEstimate estimate_kernel(const ConvexDomain& dom, const Point& x, double t,
                                      std::shared_ptr<const DomainGrid> grid,
                                      const PathParams& params) {
  require_member(dom, x, "estimate_kernel");
  if (!(t > 0.0)) throw std::invalid_argument("estimate_kernel: t must be positive");
  std::vector<std::size_t> cell(params.n_paths);
  const Point start[] = {x};
  for_each_path(dom, start, 2.0 * t, params, [&](std::size_t i, const CoupledWalker& w) {
    cell[i] = grid->cell_of(w.positions()[0]);
  });
  KernelEstimate k;
  k.t = t;
  k.source = x;
  k.counts.assign(grid->size(), 0);
  for (std::size_t c : cell) {
    if (c != DomainGrid::npos && grid->volume(c) > 0.0) {
      ++k.counts[c];
      ++k.n_included;
    }
  }
  k.density.assign(grid->size(), 0.0);
  k.std_error.assign(grid->size(), 0.0);
  const double n = static_cast<double>(k.n_included);
  for (std::size_t c = 0; c < grid->size(); ++c) {
    if (grid->volume(c) <= 0.0 || k.n_included == 0) continue;
    const double cnt = static_cast<double>(k.counts[c]);
    k.density[c] = cnt / (n * grid->volume(c));
    k.std_error[c] = std::sqrt(cnt * (1.0 - cnt / n)) / (n * grid->volume(c));
  }
  k.grid = std::move(grid);
  return k;
}

inline KernelEstimate estimate_kernel(const ConvexDomain& dom, const Point& x, double t,
                                      const GridSpec& spec, const PathParams& params) {
  return estimate_kernel(dom, x, t, std::make_shared<const DomainGrid>(dom, spec), params);
}

/// Gradient (in the endpoint variable) of the histogram after one pass of
/// nearest-neighbor (3^d block, volume-weighted) averaging. The standard
/// error treats the counts as multinomial.
struct KernelGradientField {
  std::vector<Point> gradient;
  std::vector<Point> std_error;
  std::vector<bool> interior;  // full cell, central differences on every axis
};

inline KernelGradientField kernel_gradient_field(const KernelEstimate& k) {
  const DomainGrid& g = *k.grid;
  const std::size_t d = g.dim();
  const double n = static_cast<double>(std::max<std::size_t>(1, k.n_included));
  const double full = g.full_cell_volume();

  // smoothing stencil per cell: members and the normalizer 1 / (n * sum vol)
  std::vector<std::vector<std::size_t>> blocks(g.size());
  std::vector<double> scale(g.size(), 0.0);
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (g.volume(c) <= 0.0) continue;
    double vol = 0.0;
    for (std::size_t b : g.block(c)) {
      if (g.volume(b) > 0.0) {
        blocks[c].push_back(b);
        vol += g.volume(b);
      }
    }
    scale[c] = 1.0 / (n * vol);
  }
  auto smoothed = [&](std::size_t c) {
    double s = 0.0;
    for (std::size_t b : blocks[c]) s += static_cast<double>(k.counts[b]);
    return s * scale[c];
  };

  KernelGradientField out;
  out.gradient.assign(g.size(), Point(d));
  out.std_error.assign(g.size(), Point(d));
  out.interior.assign(g.size(), false);
  std::vector<std::pair<std::size_t, double>> coef;
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (g.volume(c) <= 0.0) continue;
    bool central_everywhere = g.volume(c) >= 0.999 * full;
    for (std::size_t ax = 0; ax < d; ++ax) {
      std::size_t hi = g.neighbor(c, ax, +1), lo = g.neighbor(c, ax, -1);
      const bool hi_ok = hi != DomainGrid::npos && g.volume(hi) > 0.0;
      const bool lo_ok = lo != DomainGrid::npos && g.volume(lo) > 0.0;
      double span = 2.0 * g.width(ax);
      if (!hi_ok || !lo_ok) {
        central_everywhere = false;
        span = g.width(ax);
        if (!hi_ok) hi = c;
        if (!lo_ok) lo = c;
        if (hi == lo) continue;
      }
      out.gradient[c][ax] = (smoothed(hi) - smoothed(lo)) / span;
      // variance of a linear form in multinomial counts
      coef.clear();
      for (std::size_t b : blocks[hi]) coef.emplace_back(b, scale[hi] / span);
      for (std::size_t b : blocks[lo]) coef.emplace_back(b, -scale[lo] / span);
      std::sort(coef.begin(), coef.end());
      double sum_sq = 0.0, mean = 0.0;
      for (std::size_t i = 0; i < coef.size();) {
        double a = 0.0;
        const std::size_t cell = coef[i].first;
        for (; i < coef.size() && coef[i].first == cell; ++i) a += coef[i].second;
        const double cnt = static_cast<double>(k.counts[cell]);
        sum_sq += a * a * cnt;
        mean += a * cnt;
      }
      out.std_error[c][ax] = std::sqrt(std::max(0.0, sum_sq - mean * mean / n));
    }
    out.interior[c] = central_everywhere;
  }
  return out;
}

struct KernelGradientSup {
  double value = 0.0;
  double std_error = 0.0;
  Point at;      // cell center of the maximizer
  Point source;  // probe source of the maximizer
};

/// max over probe sources y and interior grid cells x of |grad_x p_t(x, y)|.
inline KernelGradientSup kernel_gradient_sup(const ConvexDomain& dom, double t,
                                             std::span<const Point> probe_sources,
                                             std::shared_ptr<const DomainGrid> grid,
                                             const PathParams& params) {
  if (probe_sources.empty()) throw std::invalid_argument("kernel_gradient_sup: no probes");
  KernelGradientSup best;
  for (const Point& y : probe_sources) {
    const KernelEstimate k = estimate_kernel(dom, y, t, grid, params);
    const KernelGradientField f = kernel_gradient_field(k);
    for (std::size_t c = 0; c < grid->size(); ++c) {
      if (!f.interior[c]) continue;
      const auto [mag, se] = magnitude_with_error(f.gradient[c], f.std_error[c]);
      if (mag > best.value) best = {mag, se, grid->cell_center(c), y};
    }
  }
  return best;
}

inline KernelGradientSup kernel_gradient_sup(const ConvexDomain& dom, double t,
                                             std::span<const Point> probe_sources,
                                             const GridSpec& spec, const PathParams& params) {
  return kernel_gradient_sup(dom, t, probe_sources, std::make_shared<const DomainGrid>(dom, spec),
                             params);
}

// ---------------------------------------------------------------------------
// L2 norm of P_t f

struct L2Point {
  double t = 0.0;
  double norm = 0.0;
  double std_error = 0.0;
};

/// sqrt of the quadrature of (P_t f)^2. Each node's squared mean is
/// debiased by its squared standard error.
inline std::vector<L2Point> l2_norm_curve(const ConvexDomain& dom, const TestFunction& f,
                                          std::span<const double> t_list, const Quadrature& quad,
                                          const PathParams& params) {
  if (!f.mean_zero) throw PreconditionError("l2_norm_curve: f must have zero mean");
  std::vector<L2Point> curve;
  for (double t : t_list) {
    if (t < 0.0) throw std::invalid_argument("l2_norm_curve: negative time");
    double sq = 0.0, var = 0.0;
    for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
      double m = f(quad.nodes[i]), se = 0.0;
      if (t > 0.0) {
        const McEstimate e = estimate_semigroup(dom, f, quad.nodes[i], t, params);
        m = e.mean;
        se = e.std_error;
      }
      sq += quad.weights[i] * (m * m - se * se);
      var += std::pow(2.0 * quad.weights[i] * m * se, 2);
    }
    const double nrm = std::sqrt(std::max(0.0, sq));
    curve.push_back({t, nrm, nrm > 0.0 ? std::sqrt(var) / (2.0 * nrm) : std::sqrt(std::sqrt(var))});
  }
  return curve;
}

}  // namespace rbmlab
