#pragma once

#include <cassert>
#include <cmath>
#include <numbers>

// Closed-form Neumann heat quantities on [0,1] and [0,1]^2, written
// independently of the library. Times are semigroup times (P_t = e^{t Delta}).

namespace oracle {

inline constexpr double kPi = std::numbers::pi;
inline constexpr int kTerms = 50;

/// p_t(x, y) on [0,1] from the cosine series.
inline double interval_kernel(double t, double x, double y) {
  double s = 1.0;
  for (int n = 1; n <= kTerms; ++n) {
    s += 2.0 * std::exp(-n * n * kPi * kPi * t) * std::cos(n * kPi * x) * std::cos(n * kPi * y);
  }
  assert(2.0 * std::exp(-(kTerms + 1) * (kTerms + 1) * kPi * kPi * t) < 1e-10 || t < 1e-4);
  return s;
}

/// d/dx p_t(x, y) on [0,1].
inline double interval_kernel_dx(double t, double x, double y) {
  double s = 0.0;
  for (int n = 1; n <= kTerms; ++n) {
    s -= 2.0 * n * kPi * std::exp(-n * n * kPi * kPi * t) * std::sin(n * kPi * x) * std::cos(n * kPi * y);
  }
  return s;
}

/// Integral of p_t(., y) over [a, b], for binned comparisons.
inline double interval_kernel_cell(double t, double a, double b, double y) {
  double s = b - a;
  for (int n = 1; n <= kTerms; ++n) {
    s += 2.0 * std::exp(-n * n * kPi * kPi * t) * std::cos(n * kPi * y) *
         (std::sin(n * kPi * b) - std::sin(n * kPi * a)) / (n * kPi);
  }
  return s;
}

/// sup over x, y of |d/dx p_t(x, y)| by grid search.
inline double interval_kernel_dx_sup(double t, int grid = 400) {
  double best = 0.0;
  for (int i = 0; i <= grid; ++i) {
    for (int j = 0; j <= grid; ++j) {
      best = std::max(best, std::abs(interval_kernel_dx(t, double(i) / grid, double(j) / grid)));
    }
  }
  return best;
}

inline double square_kernel_diag(double t, double x1, double x2) {
  return interval_kernel(t, x1, x1) * interval_kernel(t, x2, x2);
}

/// P_t cos(n pi x) on [0,1].
inline double cos_mode(double t, int n, double x) { return std::exp(-n * n * kPi * kPi * t) * std::cos(n * kPi * x); }

/// Green solution u = -cos(pi x)/pi^2 and its derivative.
inline double green_u(double x) { return -std::cos(kPi * x) / (kPi * kPi); }
inline double green_du(double x) { return std::sin(kPi * x) / kPi; }

/// Riesz transform of cos(pi x): -2 sin(pi x).
inline double riesz_cos(double x) { return -2.0 * std::sin(kPi * x); }

}  // namespace oracle
