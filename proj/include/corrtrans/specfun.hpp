// SPDX-License-Identifier: Apache-2.0
//
// Special functions and quadrature used throughout corrtrans: the standard
// normal density, distribution and quantile, log-gamma, the hypergeometric
// function 2F1(1/2, -p; 3/2; x) and adaptive Gauss-Kronrod integration.
// Only exp/log/sqrt/pow from <cmath> are relied upon.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace corrtrans {

/// Raised when an argument lies outside the documented domain of an operation.
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative method fails to converge or a model degenerates.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Combined error bound |err| <= abs_tol + rel_tol * |value| with an iteration cap.
struct Tolerance {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  int max_iter = 2000;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iter < 1) {
      throw DomainError("Tolerance requires abs_tol > 0, rel_tol > 0, max_iter >= 1");
    }
  }
};

namespace detail {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934381868;

// Lower tail Phi(z) for z <= 0.
inline double normal_lower_tail(double z) {
  if (z == -std::numeric_limits<double>::infinity()) return 0.0;
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
  if (z > -3.0) {
    // Phi(z) = 1/2 + phi(z) * sum_k z^{2k+1} / (2k+1)!!, all terms share sign.
    double term = z;
    double sum = z;
    const double z2 = z * z;
    for (int k = 0; k < 500; ++k) {
      term *= z2 / (2.0 * k + 3.0);
      sum += term;
      if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return 0.5 + pdf * sum;
  }
  if (pdf == 0.0) return 0.0;
  // Mills ratio as the continued fraction 1/(x+ 1/(x+ 2/(x+ 3/(x+ ...)))),
  // evaluated by the modified Lentz method.
  const double x = -z;
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 5000; ++k) {
    d = x + k * d;
    if (d == 0.0) d = tiny;
    c = x + k / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return pdf / f;
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + ": argument must be finite");
}

}  // namespace detail

/// Standard normal density.
inline double normal_pdf(double z) {
  detail::require_finite(z, "normal_pdf");
  return detail::kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

/// Standard normal distribution function; accepts +-infinity.
inline double normal_cdf(double z) {
  if (std::isnan(z)) throw DomainError("normal_cdf: NaN argument");
  if (z <= 0.0) return detail::normal_lower_tail(z);
  return 1.0 - detail::normal_lower_tail(-z);
}

/// Upper tail 1 - Phi(z), accurate in the far right tail.
inline double normal_sf(double z) {
  if (std::isnan(z)) throw DomainError("normal_sf: NaN argument");
  if (z >= 0.0) return detail::normal_lower_tail(-z);
  return 1.0 - detail::normal_lower_tail(z);
}

namespace detail {

// Rational approximation of the lower-half quantile (relative error ~1e-9),
// valid for 0 < p <= 1/2.
inline double quantile_guess(double p) {
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse of normal_cdf on (0, 1). z_alpha = normal_quantile(1 - alpha).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  // Work in the lower half; 1 - p is exact for p in [1/2, 1).
  const bool upper = p > 0.5;
  const double q = upper ? 1.0 - p : p;
  double z = detail::quantile_guess(q);
  for (int step = 0; step < 2; ++step) {
    const double pdf = detail::kInvSqrt2Pi * std::exp(-0.5 * z * z);
    if (pdf == 0.0) break;
    z -= (detail::normal_lower_tail(z) - q) / pdf;
  }
  return upper ? -z : z;
}

/// Natural log of the gamma function for x > 0 (Lanczos, g = 7, n = 9).
inline double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log_gamma: x must be positive and finite");
  static constexpr std::array<double, 9> coef{
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
  }
  const double xm = x - 1.0;
  double acc = coef[0];
  for (std::size_t i = 1; i < coef.size(); ++i) acc += coef[i] / (xm + static_cast<double>(i));
  const double t = xm + 7.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (xm + 0.5) * std::log(t) - t + std::log(acc);
}

namespace detail {

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
inline constexpr std::array<double, 8> kXgk{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct QuadPiece {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const QuadPiece& other) const { return error < other.error; }
};

template <typename F>
QuadPiece gauss_kronrod_15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    if (!std::isfinite(f1) || !std::isfinite(f2)) {
      throw NumericError("integrate_adaptive: integrand is not finite on the interval");
    }
    kronrod += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  if (!std::isfinite(fc)) throw NumericError("integrate_adaptive: integrand is not finite on the interval");
  const double value = kronrod * half;
  const double error = std::abs((kronrod - gauss) * half);
  return {a, b, value, error};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) quadrature of f over [a, b]. The interval
/// with the largest error estimate is bisected until the summed estimate meets
/// tol; tol.max_iter caps the number of bisections. Throws NumericError when
/// the cap is reached first.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, const Tolerance& tol = {}) {
  tol.validate();
  detail::require_finite(a, "integrate_adaptive");
  detail::require_finite(b, "integrate_adaptive");
  if (a == b) return 0.0;
  if (b < a) return -integrate_adaptive(f, b, a, tol);

  std::priority_queue<detail::QuadPiece> pieces;
  auto first = detail::gauss_kronrod_15(f, a, b);
  double total = first.value;
  double error = first.error;
  pieces.push(first);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int iter = 0;; ++iter) {
    if (error <= std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) return total;
    if (error <= 50.0 * eps * std::abs(total)) return total;  // roundoff floor
    if (iter >= tol.max_iter) {
      throw NumericError("integrate_adaptive: no convergence within " + std::to_string(tol.max_iter) +
                         " subdivisions");
    }
    const auto worst = pieces.top();
    pieces.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) return total;  // interval exhausted
    const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    pieces.push(left);
    pieces.push(right);
    if (pieces.size() % 64 == 0) {
      // Re-accumulate to limit drift in the running sums.
      auto copy = pieces;
      total = 0.0;
      error = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        error += copy.top().error;
        copy.pop();
      }
    }
  }
}

/// integral_0^1 (1 - r^2)^p dr = sqrt(pi) Gamma(p+1) / (2 Gamma(p+3/2)), p > -1.
/// This is the endpoint value psi(1) of the closed-form optimal transforms.
inline double gamma_ratio_endpoint(double p) {
  if (!(p > -1.0) || !std::isfinite(p)) throw DomainError("gamma_ratio_endpoint: requires p > -1");
  return std::exp(0.5 * std::log(std::numbers::pi) + log_gamma(p + 1.0) - std::log(2.0) -
                  log_gamma(p + 1.5));
}

/// 2F1(1/2, -p; 3/2; x) for 0 <= x < 1 and p > -1. Equivalently
/// integral_0^sqrt(x) (1 - r^2)^p dr / sqrt(x). Term recurrence for x <= 0.95,
/// quadrature of the integral form above that.
inline double gauss_2f1_half(double p, double x) {
  if (!(p > -1.0) || !std::isfinite(p)) throw DomainError("gauss_2f1_half: requires p > -1");
  if (!(x >= 0.0)) throw DomainError("gauss_2f1_half: requires x >= 0");
  if (!(x < 1.0)) throw DomainError("gauss_2f1_half: requires x < 1 (use gamma_ratio_endpoint at x = 1)");
  if (x <= 0.95) {
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < 100000; ++k) {
      term *= (0.5 + k) * (-p + k) * x / ((1.5 + k) * (k + 1.0));
      sum += term;
      if (term == 0.0 || std::abs(term) < 1e-15 * std::abs(sum)) return sum;
    }
    throw NumericError("gauss_2f1_half: series did not converge");
  }
  const double s = std::sqrt(x);
  auto integrand = [p](double r) { return std::pow((1.0 - r) * (1.0 + r), p); };
  return integrate_adaptive(integrand, 0.0, s, Tolerance{1e-15, 1e-14, 4000}) / s;
}

}  // namespace corrtrans
