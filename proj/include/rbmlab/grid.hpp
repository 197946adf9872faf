#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "rbmlab/geometry.hpp"
#include "rbmlab/quasi_random.hpp"

namespace rbmlab {

/// Uniform cell decomposition of an axis-aligned box.
struct GridSpec {
  Point lo;
  Point hi;
  std::vector<std::size_t> cells;  // per axis

  /// n cells per axis over the bounding box of the domain.
  static GridSpec covering(const ConvexDomain& dom, std::size_t n) {
    const Box& bb = dom.bounding_box();
    return {bb.lo, bb.hi, std::vector<std::size_t>(dom.dim(), n)};
  }

  /// Cells of (roughly) the given width, positioned so that `anchor` is a
  /// cell center, covering the bounding box of the domain.
  static GridSpec anchored(const ConvexDomain& dom, double width, const Point& anchor) {
    if (!(width > 0.0)) throw std::invalid_argument("GridSpec: width must be positive");
    const Box& bb = dom.bounding_box();
    GridSpec g{Point(dom.dim()), Point(dom.dim()), std::vector<std::size_t>(dom.dim())};
    for (std::size_t k = 0; k < dom.dim(); ++k) {
      const double below = std::ceil((anchor[k] - bb.lo[k]) / width - 0.5 - 1e-9);
      const double above = std::ceil((bb.hi[k] - anchor[k]) / width - 0.5 - 1e-9);
      g.lo[k] = anchor[k] - (below + 0.5) * width;
      g.hi[k] = anchor[k] + (above + 0.5) * width;
      g.cells[k] = static_cast<std::size_t>(below + above + 1.0);
    }
    return g;
  }
};

/// Grid restricted to a domain: per-cell intersection volume and the
/// centroid of the intersection (used as a quadrature node inside Omega).
class DomainGrid {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  DomainGrid(const ConvexDomain& dom, GridSpec spec, std::size_t subsamples = 10'000)
      : spec_(std::move(spec)), dim_(dom.dim()) {
    if (spec_.lo.dim() != dim_ || spec_.hi.dim() != dim_ || spec_.cells.size() != dim_) {
      throw DimensionMismatch("DomainGrid: spec dimension does not match the domain");
    }
    width_ = Point(dim_);
    total_ = 1;
    for (std::size_t k = 0; k < dim_; ++k) {
      if (spec_.cells[k] == 0 || !(spec_.lo[k] < spec_.hi[k])) {
        throw std::invalid_argument("DomainGrid: empty grid axis");
      }
      width_[k] = (spec_.hi[k] - spec_.lo[k]) / static_cast<double>(spec_.cells[k]);
      total_ *= spec_.cells[k];
    }
    const Box& bb = dom.bounding_box();
    for (std::size_t k = 0; k < dim_; ++k) {
      if (spec_.lo[k] > bb.lo[k] + 1e-12 || spec_.hi[k] < bb.hi[k] - 1e-12) {
        throw PreconditionError("DomainGrid: grid does not cover the domain");
      }
    }
    volume_.assign(total_, 0.0);
    centroid_.assign(total_, Point(dim_));
    for (std::size_t c = 0; c < total_; ++c) measure_cell(dom, c, subsamples);
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return total_; }
  [[nodiscard]] const GridSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] double width(std::size_t k) const noexcept { return width_[k]; }
  [[nodiscard]] double full_cell_volume() const noexcept {
    double v = 1.0;
    for (std::size_t k = 0; k < dim_; ++k) v *= width_[k];
    return v;
  }
  [[nodiscard]] double volume(std::size_t c) const noexcept { return volume_[c]; }
  [[nodiscard]] const std::vector<double>& volumes() const noexcept { return volume_; }
  [[nodiscard]] const Point& centroid(std::size_t c) const noexcept { return centroid_[c]; }

  [[nodiscard]] std::size_t index(std::span<const std::size_t> multi) const noexcept {
    std::size_t c = 0;
    for (std::size_t k = dim_; k-- > 0;) c = c * spec_.cells[k] + multi[k];
    return c;
  }

  [[nodiscard]] std::vector<std::size_t> multi_index(std::size_t c) const {
    std::vector<std::size_t> m(dim_);
    for (std::size_t k = 0; k < dim_; ++k) {
      m[k] = c % spec_.cells[k];
      c /= spec_.cells[k];
    }
    return m;
  }

  [[nodiscard]] Point cell_center(std::size_t c) const {
    Point p(dim_);
    for (std::size_t k = 0; k < dim_; ++k) {
      p[k] = spec_.lo[k] + (static_cast<double>(c % spec_.cells[k]) + 0.5) * width_[k];
      c /= spec_.cells[k];
    }
    return p;
  }

  /// Cell containing x (boundary points are clamped into the edge cells);
  /// npos when x lies outside the grid box.
  [[nodiscard]] std::size_t cell_of(const Point& x) const noexcept {
    std::size_t c = 0;
    for (std::size_t k = dim_; k-- > 0;) {
      const double u = (x[k] - spec_.lo[k]) / width_[k];
      if (u < -1e-9 || u > static_cast<double>(spec_.cells[k]) + 1e-9) return npos;
      const auto i = std::min<std::size_t>(spec_.cells[k] - 1,
                                           static_cast<std::size_t>(std::max(0.0, std::floor(u))));
      c = c * spec_.cells[k] + i;
    }
    return c;
  }

  /// Neighbor along `axis` (offset -1 or +1), npos past the grid edge.
  [[nodiscard]] std::size_t neighbor(std::size_t c, std::size_t axis, int offset) const noexcept {
    std::size_t stride = 1;
    for (std::size_t k = 0; k < axis; ++k) stride *= spec_.cells[k];
    const std::size_t i = (c / stride) % spec_.cells[axis];
    if (offset < 0 && i == 0) return npos;
    if (offset > 0 && i + 1 >= spec_.cells[axis]) return npos;
    return offset < 0 ? c - stride : c + stride;
  }

  /// All cells in the 3^d block around c that exist on the grid.
  [[nodiscard]] std::vector<std::size_t> block(std::size_t c) const {
    std::vector<std::size_t> out{c};
    for (std::size_t k = 0; k < dim_; ++k) {
      const std::size_t n = out.size();
      for (std::size_t j = 0; j < n; ++j) {
        for (int off : {-1, 1}) {
          const std::size_t nb = neighbor(out[j], k, off);
          if (nb != npos) out.push_back(nb);
        }
      }
    }
    return out;
  }

 private:
  void measure_cell(const ConvexDomain& dom, std::size_t c, std::size_t subsamples) {
    const Point center = cell_center(c);
    Point lo = center, hi = center;
    for (std::size_t k = 0; k < dim_; ++k) {
      lo[k] -= 0.5 * width_[k];
      hi[k] += 0.5 * width_[k];
    }
    if (const Box* b = dom.as_box()) {
      // exact: product of interval overlaps
      double v = 1.0;
      Point cen(dim_);
      for (std::size_t k = 0; k < dim_; ++k) {
        const double a = std::max(lo[k], b->lo[k]);
        const double z = std::min(hi[k], b->hi[k]);
        v *= std::max(0.0, z - a);
        cen[k] = 0.5 * (a + z);
      }
      volume_[c] = v;
      centroid_[c] = cen;
      return;
    }
    bool all_in = true;
    for (std::size_t corner = 0; corner < (std::size_t{1} << dim_) && all_in; ++corner) {
      Point p(dim_);
      for (std::size_t k = 0; k < dim_; ++k) p[k] = (corner >> k) & 1U ? hi[k] : lo[k];
      all_in = contains(dom, p);
    }
    if (all_in) {
      volume_[c] = full_cell_volume();
      centroid_[c] = center;
      return;
    }
    if (distance(center, project(dom, center)) > 0.5 * norm(width_) * (1.0 + 1e-9)) {
      centroid_[c] = center;  // disjoint from the domain
      return;
    }
    std::size_t hits = 0;
    Point sum(dim_), p(dim_);
    for (std::size_t i = 1; i <= subsamples; ++i) {
      for (std::size_t k = 0; k < dim_; ++k) p[k] = lo[k] + halton(i, k) * width_[k];
      if (contains(dom, p)) {
        ++hits;
        sum += p;
      }
    }
    volume_[c] = full_cell_volume() * static_cast<double>(hits) / static_cast<double>(subsamples);
    centroid_[c] = hits ? sum / static_cast<double>(hits) : center;
  }

  GridSpec spec_;
  std::size_t dim_;
  Point width_;
  std::size_t total_ = 0;
  std::vector<double> volume_;
  std::vector<Point> centroid_;
};

/// Midpoint-type quadrature over the domain: nodes at intersection centroids,
/// weights equal to intersection volumes.
struct Quadrature {
  std::vector<Point> nodes;
  std::vector<double> weights;

  static Quadrature from_grid(const DomainGrid& g) {
    Quadrature q;
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (g.volume(c) > 0.0) {
        q.nodes.push_back(g.centroid(c));
        q.weights.push_back(g.volume(c));
      }
    }
    return q;
  }

  static Quadrature on(const ConvexDomain& dom, std::size_t cells_per_axis) {
    return from_grid(DomainGrid(dom, GridSpec::covering(dom, cells_per_axis)));
  }

  template <class F>
  [[nodiscard]] double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }

  [[nodiscard]] double total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

}  // namespace rbmlab
