#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace rbmlab {

/// Largest ambient dimension supported by the fixed-capacity Point.
inline constexpr std::size_t kMaxDim = 8;

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Point / vector in R^d with inline storage (no heap traffic in the
/// simulation hot loop).
class Point {
 public:
  Point() = default;

  explicit Point(std::size_t dim, double fill = 0.0) : dim_(dim) {
    if (dim == 0 || dim > kMaxDim) {
      throw std::invalid_argument("Point dimension must be in [1, " +
                                  std::to_string(kMaxDim) + "]");
    }
    for (std::size_t k = 0; k < dim; ++k) c_[k] = fill;
  }

  Point(std::initializer_list<double> coords) : Point(coords.size()) {
    std::size_t k = 0;
    for (double v : coords) c_[k++] = v;
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] bool empty() const noexcept { return dim_ == 0; }

  double& operator[](std::size_t k) noexcept { return c_[k]; }
  double operator[](std::size_t k) const noexcept { return c_[k]; }

  [[nodiscard]] const double* begin() const noexcept { return c_.data(); }
  [[nodiscard]] const double* end() const noexcept { return c_.data() + dim_; }
  double* begin() noexcept { return c_.data(); }
  double* end() noexcept { return c_.data() + dim_; }

  static Point unit(std::size_t dim, std::size_t axis) {
    Point e(dim);
    e[axis] = 1.0;
    return e;
  }

  Point& operator+=(const Point& o) noexcept {
    for (std::size_t k = 0; k < dim_; ++k) c_[k] += o.c_[k];
    return *this;
  }
  Point& operator-=(const Point& o) noexcept {
    for (std::size_t k = 0; k < dim_; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Point& operator*=(double s) noexcept {
    for (std::size_t k = 0; k < dim_; ++k) c_[k] *= s;
    return *this;
  }
  Point& operator/=(double s) noexcept {
    for (std::size_t k = 0; k < dim_; ++k) c_[k] /= s;
    return *this;
  }

  friend Point operator+(Point a, const Point& b) noexcept { return a += b; }
  friend Point operator-(Point a, const Point& b) noexcept { return a -= b; }
  friend Point operator*(Point a, double s) noexcept { return a *= s; }
  friend Point operator*(double s, Point a) noexcept { return a *= s; }
  friend Point operator/(Point a, double s) noexcept { return a /= s; }
  friend Point operator-(Point a) noexcept { return a *= -1.0; }

  friend bool operator==(const Point& a, const Point& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (std::size_t k = 0; k < a.dim_; ++k) {
      if (a.c_[k] != b.c_[k]) return false;
    }
    return true;
  }

 private:
  std::array<double, kMaxDim> c_{};
  std::size_t dim_ = 0;
};

inline void require_same_dim(const Point& a, const Point& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch(std::string(what) + ": dimension mismatch (" +
                            std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()) + ")");
  }
}

inline double dot(const Point& a, const Point& b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm2(const Point& a) noexcept { return dot(a, a); }
inline double norm(const Point& a) noexcept { return std::sqrt(norm2(a)); }
inline double distance(const Point& a, const Point& b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline std::string to_string(const Point& p) {
  std::string s = "(";
  for (std::size_t k = 0; k < p.dim(); ++k) {
    if (k) s += ", ";
    s += std::to_string(p[k]);
  }
  return s + ")";
}

}  // namespace rbmlab
