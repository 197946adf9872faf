#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rbmlab/point.hpp"
#include "rbmlab/quasi_random.hpp"
#include "rbmlab/tolerances.hpp"

namespace rbmlab {

struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Ball {
  Point center;
  double radius = 1.0;
};

struct Box {
  Point lo;
  Point hi;
  [[nodiscard]] double length(std::size_t k) const { return hi[k] - lo[k]; }
};

struct Halfspace {
  Point normal;  // unit outward normal a_i
  double offset = 0.0;  // b_i; the halfspace is {x : a_i.x <= b_i}
};

/// Bounded polyhedron {x : a_i.x <= b_i}. Construction enumerates the
/// vertices once; they supply the bounding box, diameter and volume.
class Polytope {
 public:
  Polytope() = default;

  explicit Polytope(std::vector<Halfspace> halfspaces) : faces_(std::move(halfspaces)) {
    if (faces_.empty()) throw std::invalid_argument("Polytope: no halfspaces");
    dim_ = faces_.front().normal.dim();
    for (const auto& h : faces_) {
      if (h.normal.dim() != dim_) throw DimensionMismatch("Polytope: mixed halfspace dimensions");
      if (std::abs(norm(h.normal) - 1.0) > 1e-9) {
        throw std::invalid_argument("Polytope: halfspace normal is not a unit vector");
      }
    }
    check_bounded();
    enumerate_vertices();
    check_interior();
  }

  // Accepts arbitrary (a_i, b_i) and rescales each row to a unit normal.
  static Polytope from_rows(const std::vector<std::pair<Point, double>>& rows) {
    std::vector<Halfspace> faces;
    faces.reserve(rows.size());
    for (const auto& [a, b] : rows) {
      const double n = norm(a);
      if (!(n > 0.0)) throw std::invalid_argument("Polytope: zero normal");
      faces.push_back({a / n, b / n});
    }
    return Polytope(std::move(faces));
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] const std::vector<Halfspace>& faces() const noexcept { return faces_; }
  [[nodiscard]] const std::vector<Point>& vertices() const noexcept { return vertices_; }
  [[nodiscard]] const Point& interior_point() const noexcept { return centroid_; }

  [[nodiscard]] double max_violation(const Point& x) const noexcept {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& h : faces_) v = std::max(v, dot(h.normal, x) - h.offset);
    return v;
  }

 private:
  void check_bounded() const {
    // Boundedness probe: every +-e_k must be blocked by some facet.
    for (std::size_t k = 0; k < dim_; ++k) {
      for (double sign : {1.0, -1.0}) {
        bool blocked = false;
        for (const auto& h : faces_) blocked = blocked || sign * h.normal[k] > 1e-12;
        if (!blocked) throw std::invalid_argument("Polytope: unbounded along a coordinate direction");
      }
    }
  }

  void enumerate_vertices() {
    const std::size_t m = faces_.size();
    if (m < dim_ + 1) throw std::invalid_argument("Polytope: too few halfspaces to be bounded");
    std::vector<std::size_t> pick(dim_);
    for (std::size_t k = 0; k < dim_; ++k) pick[k] = k;
    Eigen::MatrixXd A(dim_, dim_);
    Eigen::VectorXd b(dim_);
    while (true) {
      for (std::size_t r = 0; r < dim_; ++r) {
        for (std::size_t c = 0; c < dim_; ++c) A(r, c) = faces_[pick[r]].normal[c];
        b(r) = faces_[pick[r]].offset;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      if (lu.rank() == static_cast<Eigen::Index>(dim_)) {
        Eigen::VectorXd v = lu.solve(b);
        Point p(dim_);
        for (std::size_t c = 0; c < dim_; ++c) p[c] = v(c);
        if (max_violation(p) <= 1e-9) add_vertex(p);
      }
      // next combination
      std::size_t i = dim_;
      while (i > 0 && pick[i - 1] == m - dim_ + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < dim_; ++j) pick[j] = pick[j - 1] + 1;
    }
    if (vertices_.size() < dim_ + 1) throw std::invalid_argument("Polytope: empty or degenerate");
    centroid_ = Point(dim_);
    for (const auto& v : vertices_) centroid_ += v;
    centroid_ /= static_cast<double>(vertices_.size());
  }

  void add_vertex(const Point& p) {
    for (const auto& v : vertices_) {
      if (distance(v, p) <= 1e-9) return;
    }
    vertices_.push_back(p);
  }

  void check_interior() const {
    // Interior probe at the vertex centroid.
    if (max_violation(centroid_) > -1e-9) {
      throw std::invalid_argument("Polytope: empty interior");
    }
  }

  std::vector<Halfspace> faces_;
  std::vector<Point> vertices_;
  Point centroid_;
  std::size_t dim_ = 0;
};

enum class DomainKind { kBall, kBox, kPolytope };

inline const char* kind_name(DomainKind k) {
  switch (k) {
    case DomainKind::kBall: return "ball";
    case DomainKind::kBox: return "box";
    case DomainKind::kPolytope: return "polytope";
  }
  return "?";
}

/// Compact convex domain: immutable after construction, safe to share
/// between worker threads.
class ConvexDomain {
 public:
  using Shape = std::variant<Ball, Box, Polytope>;

  static ConvexDomain ball(Point center, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("Ball radius must be positive");
    return ConvexDomain(Ball{std::move(center), radius});
  }

  static ConvexDomain box(Point lo, Point hi) {
    require_same_dim(lo, hi, "Box");
    for (std::size_t k = 0; k < lo.dim(); ++k) {
      if (!(lo[k] < hi[k])) throw std::invalid_argument("Box requires lo[k] < hi[k]");
    }
    return ConvexDomain(Box{std::move(lo), std::move(hi)});
  }

  static ConvexDomain unit_box(std::size_t dim) { return box(Point(dim, 0.0), Point(dim, 1.0)); }
  static ConvexDomain unit_disk() { return ball(Point{0.0, 0.0}, 1.0); }

  static ConvexDomain polytope(Polytope p) { return ConvexDomain(std::move(p)); }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] DomainKind kind() const noexcept { return static_cast<DomainKind>(shape_.index()); }
  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] const Box* as_box() const noexcept { return std::get_if<Box>(&shape_); }
  [[nodiscard]] const Ball* as_ball() const noexcept { return std::get_if<Ball>(&shape_); }
  [[nodiscard]] const Polytope* as_polytope() const noexcept { return std::get_if<Polytope>(&shape_); }

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  ConvexDomain& set_name(std::string n) {
    name_ = std::move(n);
    return *this;
  }

  [[nodiscard]] const Box& bounding_box() const noexcept { return bbox_; }
  [[nodiscard]] double diameter() const noexcept { return diameter_; }
  [[nodiscard]] double volume() const noexcept { return volume_; }
  /// A reference interior point (center / centroid).
  [[nodiscard]] const Point& center() const noexcept { return center_; }

 private:
  explicit ConvexDomain(Shape s) : shape_(std::move(s)) {
    std::visit([this](const auto& sh) { init(sh); }, shape_);
    name_ = kind_name(kind());
  }

  void init(const Ball& b) {
    dim_ = b.center.dim();
    center_ = b.center;
    bbox_ = {b.center - Point(dim_, b.radius), b.center + Point(dim_, b.radius)};
    diameter_ = 2.0 * b.radius;
    const double n = static_cast<double>(dim_);
    volume_ = std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0) * std::pow(b.radius, n);
  }

  void init(const Box& b) {
    dim_ = b.lo.dim();
    center_ = (b.lo + b.hi) * 0.5;
    bbox_ = b;
    diameter_ = distance(b.lo, b.hi);
    volume_ = 1.0;
    for (std::size_t k = 0; k < dim_; ++k) volume_ *= b.length(k);
  }

  void init(const Polytope& p) {
    dim_ = p.dim();
    center_ = p.interior_point();
    Point lo = p.vertices().front(), hi = lo;
    for (const auto& v : p.vertices()) {
      for (std::size_t k = 0; k < dim_; ++k) {
        lo[k] = std::min(lo[k], v[k]);
        hi[k] = std::max(hi[k], v[k]);
      }
    }
    bbox_ = {lo, hi};
    diameter_ = 0.0;
    for (const auto& a : p.vertices()) {
      for (const auto& b : p.vertices()) diameter_ = std::max(diameter_, distance(a, b));
    }
    volume_ = polytope_volume(p);
  }

  [[nodiscard]] double polytope_volume(const Polytope& p) const {
    if (dim_ == 1) return bbox_.hi[0] - bbox_.lo[0];
    if (dim_ == 2) {
      // convex polygon: order vertices by angle about the centroid, shoelace
      std::vector<Point> v = p.vertices();
      const Point c = p.interior_point();
      std::sort(v.begin(), v.end(), [&](const Point& a, const Point& b) {
        return std::atan2(a[1] - c[1], a[0] - c[0]) < std::atan2(b[1] - c[1], b[0] - c[0]);
      });
      double area = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Point& a = v[i];
        const Point& b = v[(i + 1) % v.size()];
        area += a[0] * b[1] - b[0] * a[1];
      }
      return 0.5 * std::abs(area);
    }
    // d >= 3: quasi-Monte Carlo over the bounding box
    constexpr std::uint64_t n = 200'000;
    std::uint64_t hits = 0;
    Point x(dim_);
    for (std::uint64_t i = 1; i <= n; ++i) {
      for (std::size_t k = 0; k < dim_; ++k) {
        x[k] = bbox_.lo[k] + halton(i, k) * (bbox_.hi[k] - bbox_.lo[k]);
      }
      if (p.max_violation(x) <= 0.0) ++hits;
    }
    double box_vol = 1.0;
    for (std::size_t k = 0; k < dim_; ++k) box_vol *= bbox_.hi[k] - bbox_.lo[k];
    return box_vol * static_cast<double>(hits) / static_cast<double>(n);
  }

  Shape shape_;
  std::size_t dim_ = 0;
  Box bbox_;
  Point center_;
  double diameter_ = 0.0;
  double volume_ = 0.0;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Membership and projection

inline bool contains(const ConvexDomain& dom, const Point& x,
                     const Tolerances& tol = default_tolerances()) {
  if (x.dim() != dom.dim()) throw DimensionMismatch("contains: dimension mismatch");
  switch (dom.kind()) {
    case DomainKind::kBall: {
      const Ball& b = *dom.as_ball();
      return distance(x, b.center) - b.radius <= tol.membership;
    }
    case DomainKind::kBox: {
      const Box& b = *dom.as_box();
      for (std::size_t k = 0; k < x.dim(); ++k) {
        if (x[k] < b.lo[k] - tol.membership || x[k] > b.hi[k] + tol.membership) return false;
      }
      return true;
    }
    case DomainKind::kPolytope:
      return dom.as_polytope()->max_violation(x) <= tol.membership;
  }
  return false;
}

namespace detail {

inline Point project_halfspace(const Point& x, const Halfspace& h) {
  const double excess = dot(h.normal, x) - h.offset;
  if (excess <= 0.0) return x;
  return x - h.normal * excess;
}

// Exact projection onto the affine set {a_i.p = b_i, i in active}; used to
// polish the Dykstra iterate once the active facets are identified.
inline bool polish_on_active_set(const Polytope& poly, const Point& x, const Point& approx,
                                 Point& out) {
  const auto& faces = poly.faces();
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    if (dot(faces[i].normal, approx) - faces[i].offset >= -1e-8) active.push_back(i);
  }
  if (active.empty()) return false;
  const std::size_t d = x.dim();
  const auto m = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd A(m, static_cast<Eigen::Index>(d));
  Eigen::VectorXd r(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& f = faces[active[static_cast<std::size_t>(i)]];
    for (std::size_t c = 0; c < d; ++c) A(i, static_cast<Eigen::Index>(c)) = f.normal[c];
    r(i) = dot(f.normal, x) - f.offset;
  }
  const Eigen::MatrixXd G = A * A.transpose();
  const Eigen::VectorXd lambda = G.completeOrthogonalDecomposition().solve(r);
  if (lambda.minCoeff() < -1e-10) return false;
  Eigen::VectorXd shift = A.transpose() * lambda;
  Point p = x;
  for (std::size_t c = 0; c < d; ++c) p[c] -= shift(static_cast<Eigen::Index>(c));
  if (poly.max_violation(p) > 1e-13) return false;
  if (distance(p, approx) > 1e-6) return false;
  out = p;
  return true;
}

inline Point project_polytope(const Polytope& poly, const Point& x, const Tolerances& tol) {
  const auto& faces = poly.faces();
  std::vector<Point> incr(faces.size(), Point(x.dim()));
  Point y = x;
  bool converged = false;
  for (std::size_t sweep = 0; sweep < tol.dykstra_max_sweeps; ++sweep) {
    const Point prev = y;
    for (std::size_t i = 0; i < faces.size(); ++i) {
      const Point z = y + incr[i];
      y = project_halfspace(z, faces[i]);
      incr[i] = z - y;
    }
    if (distance(y, prev) <= tol.dykstra && poly.max_violation(y) <= tol.dykstra) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("Dykstra projection did not converge; halfspace set is ill-conditioned");
  }
  Point polished;
  if (polish_on_active_set(poly, x, y, polished)) return polished;
  return y;
}

}  // namespace detail

/// Metric projection onto the domain; identity on members.
inline Point project(const ConvexDomain& dom, const Point& x,
                     const Tolerances& tol = default_tolerances()) {
  if (x.dim() != dom.dim()) throw DimensionMismatch("project: dimension mismatch");
  switch (dom.kind()) {
    case DomainKind::kBall: {
      const Ball& b = *dom.as_ball();
      const Point rel = x - b.center;
      const double r = norm(rel);
      if (r <= b.radius) return x;
      return b.center + rel * (b.radius / r);
    }
    case DomainKind::kBox: {
      const Box& b = *dom.as_box();
      Point p = x;
      for (std::size_t k = 0; k < p.dim(); ++k) p[k] = std::clamp(p[k], b.lo[k], b.hi[k]);
      return p;
    }
    case DomainKind::kPolytope: {
      const Polytope& poly = *dom.as_polytope();
      if (poly.max_violation(x) <= 0.0) return x;
      return detail::project_polytope(poly, x, tol);
    }
  }
  return x;
}

/// Distance to the boundary: interior depth for members, distance to the
/// domain for exterior points.
inline double boundary_distance(const ConvexDomain& dom, const Point& y,
                                const Tolerances& tol = default_tolerances()) {
  if (y.dim() != dom.dim()) throw DimensionMismatch("boundary_distance: dimension mismatch");
  if (!contains(dom, y, tol)) return distance(y, project(dom, y, tol));
  switch (dom.kind()) {
    case DomainKind::kBall: {
      const Ball& b = *dom.as_ball();
      return std::abs(b.radius - distance(y, b.center));
    }
    case DomainKind::kBox: {
      const Box& b = *dom.as_box();
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < y.dim(); ++k) {
        d = std::min({d, std::abs(y[k] - b.lo[k]), std::abs(b.hi[k] - y[k])});
      }
      return d;
    }
    case DomainKind::kPolytope:
      return std::abs(dom.as_polytope()->max_violation(y));
  }
  return 0.0;
}

/// Inward unit normal at a boundary point. At polytope/box edges and corners
/// it is the normalized average of the active facet normals.
inline Point inward_normal(const ConvexDomain& dom, const Point& y,
                           const Tolerances& tol = default_tolerances()) {
  if (y.dim() != dom.dim()) throw DimensionMismatch("inward_normal: dimension mismatch");
  if (boundary_distance(dom, y, tol) > tol.boundary) {
    throw PreconditionError("inward_normal: point " + to_string(y) + " is not on the boundary");
  }
  Point n(dom.dim());
  switch (dom.kind()) {
    case DomainKind::kBall:
      n = dom.as_ball()->center - y;
      break;
    case DomainKind::kBox: {
      const Box& b = *dom.as_box();
      for (std::size_t k = 0; k < y.dim(); ++k) {
        if (std::abs(y[k] - b.lo[k]) <= tol.active_facet) n[k] += 1.0;
        if (std::abs(y[k] - b.hi[k]) <= tol.active_facet) n[k] -= 1.0;
      }
      break;
    }
    case DomainKind::kPolytope:
      for (const auto& h : dom.as_polytope()->faces()) {
        if (std::abs(dot(h.normal, y) - h.offset) <= tol.active_facet) n -= h.normal;
      }
      break;
  }
  const double len = norm(n);
  if (!(len > 0.0)) throw PreconditionError("inward_normal: degenerate normal cone");
  return n / len;
}

/// <y - z, N(y)> for y on the boundary and z in the domain; convexity makes
/// this nonpositive.
inline double monotonicity_check(const ConvexDomain& dom, const Point& y, const Point& z,
                                 const Tolerances& tol = default_tolerances()) {
  require_same_dim(y, z, "monotonicity_check");
  if (!contains(dom, z, tol)) throw PreconditionError("monotonicity_check: z is not in the domain");
  return dot(y - z, inward_normal(dom, y, tol));
}

}  // namespace rbmlab
