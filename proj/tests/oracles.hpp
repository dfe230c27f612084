// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations used only by the tests. Nothing here
// shares code with the library beyond plain arithmetic.
#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_pFq.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline double normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

inline double normal_sf(double z) { return 0.5 * boost::math::erfc(z / std::sqrt(2.0)); }

/// Quantile by bisection against the Boost CDF.
inline double bisection_quantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

template <typename F>
double quad(F f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-14, &err);
}

/// 2F1(1/2, -p; 3/2; x) through Boost's generic pFq.
inline double hyp_2f1_half(double p, double x) {
  return boost::math::hypergeometric_pFq({0.5, -p}, {1.5}, x);
}

inline double endpoint(double p) {
  return std::sqrt(std::numbers::pi) * boost::math::tgamma(p + 1.0) / (2.0 * boost::math::tgamma(p + 1.5));
}

/// E[Y^i Z^j] for a standard bivariate normal pair, by summing over all
/// perfect matchings of the i + j factors (Isserlis / Wick).
inline double isserlis_moment(double rho, int i, int j) {
  std::vector<int> labels;
  for (int k = 0; k < i; ++k) labels.push_back(0);
  for (int k = 0; k < j; ++k) labels.push_back(1);
  if (labels.size() % 2 != 0) return 0.0;
  std::vector<bool> used(labels.size(), false);
  auto rec = [&](auto&& self) -> double {
    std::size_t first = 0;
    while (first < labels.size() && used[first]) ++first;
    if (first == labels.size()) return 1.0;
    used[first] = true;
    double total = 0.0;
    for (std::size_t k = first + 1; k < labels.size(); ++k) {
      if (used[k]) continue;
      used[k] = true;
      const double cov = labels[first] == labels[k] ? 1.0 : rho;
      total += cov * self(self);
      used[k] = false;
    }
    used[first] = false;
    return total;
  };
  return rec(rec);
}

/// E[Y^i Z^j] for the four-point law on {-1, 1}^2 by direct summation.
inline double four_point_moment(double rho, int i, int j) {
  const std::array<std::array<double, 3>, 4> atoms{{
      {1.0, 1.0, (1.0 + rho) / 4.0},
      {-1.0, -1.0, (1.0 + rho) / 4.0},
      {1.0, -1.0, (1.0 - rho) / 4.0},
      {-1.0, 1.0, (1.0 - rho) / 4.0},
  }};
  double s = 0.0;
  for (const auto& a : atoms) s += a[2] * std::pow(a[0], i) * std::pow(a[1], j);
  return s;
}

/// Pearson's R by the two-pass textbook formula.
inline double two_pass_r(const std::vector<std::array<double, 2>>& xs) {
  double my = 0.0;
  double mz = 0.0;
  for (const auto& p : xs) {
    my += p[0];
    mz += p[1];
  }
  my /= static_cast<double>(xs.size());
  mz /= static_cast<double>(xs.size());
  double syy = 0.0;
  double szz = 0.0;
  double syz = 0.0;
  for (const auto& p : xs) {
    syy += (p[0] - my) * (p[0] - my);
    szz += (p[1] - mz) * (p[1] - mz);
    syz += (p[0] - my) * (p[1] - mz);
  }
  if (syy == 0.0 || szz == 0.0) return 0.0;
  return syz / std::sqrt(syy * szz);
}

}  // namespace oracle
