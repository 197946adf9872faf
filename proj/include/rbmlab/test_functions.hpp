#pragma once

#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rbmlab/geometry.hpp"
#include "rbmlab/grid.hpp"

namespace rbmlab {

/// A named bounded function on the domain, optionally with its exact
/// gradient. `mean_zero` marks functions with zero integral over the domain.
struct TestFunction {
  std::string name;
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;  // empty when not declared
  bool mean_zero = false;

  double operator()(const Point& x) const { return value(x); }
  [[nodiscard]] bool has_gradient() const noexcept { return static_cast<bool>(gradient); }

  [[nodiscard]] TestFunction scaled(double alpha) const {
    TestFunction f = *this;
    f.name = std::to_string(alpha) + "*" + name;
    f.value = [v = value, alpha](const Point& x) { return alpha * v(x); };
    if (gradient) f.gradient = [g = gradient, alpha](const Point& x) { return g(x) * alpha; };
    return f;
  }

  /// f - c; the gradient is unchanged.
  [[nodiscard]] TestFunction shifted(double c, std::string new_name, bool now_mean_zero) const {
    TestFunction f = *this;
    f.name = std::move(new_name);
    f.value = [v = value, c](const Point& x) { return v(x) - c; };
    f.mean_zero = now_mean_zero;
    return f;
  }
};

struct UnknownFunction : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::optional<std::size_t> parse_index(std::string_view s) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

inline TestFunction constant(double c, std::string name, std::size_t dim) {
  return {std::move(name), [c](const Point&) { return c; },
          [dim](const Point&) { return Point(dim); }, c == 0.0};
}

// cos(n pi (x_k - lo)/L) on a box: a Neumann eigenfunction with eigenvalue
// (n pi / L)^2 of -Laplacian. Elsewhere plain cos(n pi x_k).
inline TestFunction cosine_mode(const ConvexDomain& dom, std::size_t n, std::size_t axis,
                                std::string name) {
  double lo = 0.0, len = 1.0;
  bool mean_zero = false;
  if (const Box* b = dom.as_box()) {
    lo = b->lo[axis];
    len = b->length(axis);
    mean_zero = n >= 1;
  }
  const double w = static_cast<double>(n) * std::numbers::pi / len;
  const std::size_t dim = dom.dim();
  return {std::move(name), [=](const Point& x) { return std::cos(w * (x[axis] - lo)); },
          [=](const Point& x) {
            Point g(dim);
            g[axis] = -w * std::sin(w * (x[axis] - lo));
            return g;
          },
          mean_zero};
}

// Smooth compactly supported bump exp(1 - 1/(1 - s)), s = |x - c|^2 / R^2.
inline TestFunction bump(const ConvexDomain& dom, std::string name) {
  const Point c = dom.center();
  const double r2 = std::pow(0.25 * dom.diameter(), 2);
  const std::size_t dim = dom.dim();
  return {std::move(name),
          [=](const Point& x) {
            const double s = norm2(x - c) / r2;
            return s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s)) : 0.0;
          },
          [=](const Point& x) {
            const Point rel = x - c;
            const double s = norm2(rel) / r2;
            if (s >= 1.0) return Point(dim);
            const double v = std::exp(1.0 - 1.0 / (1.0 - s));
            return rel * (-v / ((1.0 - s) * (1.0 - s)) * 2.0 / r2);
          },
          false};
}

inline TestFunction gaussian(const ConvexDomain& dom, std::string name) {
  const Point c = dom.center();
  const double s2 = std::pow(0.15 * dom.diameter(), 2);
  return {std::move(name), [=](const Point& x) { return std::exp(-norm2(x - c) / (2.0 * s2)); },
          [=](const Point& x) {
            const Point rel = x - c;
            return rel * (-std::exp(-norm2(rel) / (2.0 * s2)) / s2);
          },
          false};
}

}  // namespace detail

/// Mean of f over the domain by grid quadrature.
inline double domain_mean(const ConvexDomain& dom, const std::function<double(const Point&)>& f,
                          std::size_t cells_per_axis = 0) {
  if (cells_per_axis == 0) cells_per_axis = dom.dim() == 1 ? 4000 : dom.dim() == 2 ? 200 : 40;
  const Quadrature q = Quadrature::on(dom, cells_per_axis);
  return q.integrate(f) / q.total_weight();
}

/// Built-in functions, resolved against a domain:
///   one, zero, x<k>, centered_x<k>, cos<n>_x<k>, bump, gauss, r2, x1x2,
///   and <name>_mz for any of them (mean subtracted by quadrature).
/// Axis indices are 1-based.
inline TestFunction make_test_function(const std::string& name, const ConvexDomain& dom) {
  const std::size_t d = dom.dim();
  auto axis_of = [&](std::string_view digits) -> std::size_t {
    const auto k = detail::parse_index(digits);
    if (!k || *k == 0 || *k > d) throw UnknownFunction("test function '" + name + "': bad axis");
    return *k - 1;
  };

  constexpr std::string_view kMz = "_mz";
  if (name.size() > kMz.size() && name.ends_with(kMz)) {
    const TestFunction base = make_test_function(name.substr(0, name.size() - kMz.size()), dom);
    const double m = domain_mean(dom, base.value);
    return base.shifted(m, name, true);
  }
  if (name == "one") return detail::constant(1.0, name, d);
  if (name == "zero") return detail::constant(0.0, name, d);
  if (name == "bump") return detail::bump(dom, name);
  if (name == "gauss") return detail::gaussian(dom, name);
  if (name == "r2") {
    const Point c = dom.center();
    return {name, [c](const Point& x) { return norm2(x - c); },
            [c](const Point& x) { return (x - c) * 2.0; }, false};
  }
  if (name == "x1x2") {
    if (d < 2) throw UnknownFunction("test function 'x1x2' needs d >= 2");
    return {name, [](const Point& x) { return x[0] * x[1]; },
            [d](const Point& x) {
              Point g(d);
              g[0] = x[1];
              g[1] = x[0];
              return g;
            },
            false};
  }
  const std::string_view sv = name;
  if (sv.starts_with("centered_x")) {
    const std::size_t k = axis_of(sv.substr(10));
    const double c = dom.center()[k];
    // the reference center is the symmetry center for balls and boxes
    const bool symmetric = dom.kind() != DomainKind::kPolytope;
    return {name, [k, c](const Point& x) { return x[k] - c; },
            [k, d](const Point&) { return Point::unit(d, k); }, symmetric};
  }
  if (sv.starts_with("x")) {
    const std::size_t k = axis_of(sv.substr(1));
    return {name, [k](const Point& x) { return x[k]; },
            [k, d](const Point&) { return Point::unit(d, k); }, false};
  }
  if (sv.starts_with("cos")) {
    const auto sep = sv.find("_x");
    if (sep != std::string_view::npos) {
      const auto n = detail::parse_index(sv.substr(3, sep - 3));
      if (n) return detail::cosine_mode(dom, *n, axis_of(sv.substr(sep + 2)), name);
    }
  }
  throw UnknownFunction("unknown test function '" + name + "'");
}

inline bool is_known_test_function(const std::string& name, const ConvexDomain& dom) {
  try {
    (void)make_test_function(name, dom);
    return true;
  } catch (const UnknownFunction&) {
    return false;
  }
}

inline double grad_norm(const TestFunction& f, const Point& x) { return norm(f.gradient(x)); }

}  // namespace rbmlab
