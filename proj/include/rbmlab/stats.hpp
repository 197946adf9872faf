#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace rbmlab {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

/// Mean and standard error of per-path samples, summed in index order.
/// Constant samples give stderr exactly zero.
inline McEstimate summarize(std::span<const double> xs) {
  McEstimate e;
  e.n_samples = xs.size();
  if (xs.empty()) return e;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double n = static_cast<double>(xs.size());
  e.mean = sum / n;
  if (xs.size() < 2) return e;
  if (std::ranges::all_of(xs, [&](double x) { return x == xs[0]; })) {
    e.mean = xs[0];  // no rounding drift for constant samples
    return e;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  e.std_error = std::sqrt(ss / (n - 1.0) / n);
  return e;
}

/// Unbiased sample variance and the standard error of that estimator,
/// sqrt((m4 - (n-3)/(n-1) s^4) / n).
struct VarianceEstimate {
  double variance = 0.0;
  double std_error = 0.0;
};

inline VarianceEstimate sample_variance(std::span<const double> xs) {
  VarianceEstimate v;
  const std::size_t n = xs.size();
  if (n < 2) return v;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double dn = static_cast<double>(n);
  const double mean = sum / dn;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  v.variance = m2 / (dn - 1.0);
  const double fourth = m4 / dn;
  const double spread = fourth - (dn - 3.0) / (dn - 1.0) * v.variance * v.variance;
  v.std_error = std::sqrt(std::max(0.0, spread) / dn);
  return v;
}

/// Ordinary least squares y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_line: need matching arrays with at least two points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  f.residuals.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    ssr += f.residuals[i] * f.residuals[i];
  }
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  return f;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace rbmlab
