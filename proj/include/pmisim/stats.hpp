#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace pmisim {

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

namespace detail {

/// Continued fraction for the regularized incomplete beta function.
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log(1.0 - x);
  const double bt = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::betacf(a, b, x) / a;
  return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of Student's t with `dof` degrees of freedom.
inline double t_two_sided_p(double t, double dof) {
  if (dof <= 0.0) throw std::domain_error("t_two_sided_p: dof must be > 0");
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p_two_sided = 1.0;
};

/// Welch's unequal-variance t-test.
inline WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::invalid_argument("welch_t_test: need at least two samples per group");
  }
  const double ma = mean(a);
  const double mb = mean(b);
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  WelchResult r;
  if (va + vb == 0.0) {
    r.t = (ma == mb) ? 0.0 : std::numeric_limits<double>::infinity();
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.p_two_sided = (ma == mb) ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / static_cast<double>(a.size() - 1) +
           vb * vb / static_cast<double>(b.size() - 1));
  r.p_two_sided = t_two_sided_p(std::fabs(r.t), r.dof);
  return r;
}

struct TrendResult {
  double slope = 0.0;
  double t = 0.0;
  double p_two_sided = 1.0;
};

/// OLS slope of y against its index, with the usual t-test on the slope.
inline TrendResult linear_trend(std::span<const double> y) {
  const size_t n = y.size();
  if (n < 3) throw std::invalid_argument("linear_trend: need at least three points");
  const double mx = (static_cast<double>(n) - 1.0) / 2.0;
  const double my = mean(y);
  double sxx = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxx += dx * dx;
    sxy += dx * (y[i] - my);
  }
  TrendResult r;
  r.slope = sxy / sxx;
  double sse = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double fit = my + r.slope * (static_cast<double>(i) - mx);
    sse += (y[i] - fit) * (y[i] - fit);
  }
  const double se2 = sse / static_cast<double>(n - 2) / sxx;
  if (se2 <= 0.0) {
    r.t = 0.0;
    r.p_two_sided = 1.0;
    return r;
  }
  r.t = r.slope / std::sqrt(se2);
  r.p_two_sided = t_two_sided_p(std::fabs(r.t), static_cast<double>(n - 2));
  return r;
}

}  // namespace pmisim
