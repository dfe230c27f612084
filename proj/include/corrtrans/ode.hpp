// SPDX-License-Identifier: Apache-2.0
//
// Dormand-Prince 5(4) embedded Runge-Kutta integrator for small fixed-size
// systems y' = f(t, y).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>

#include "corrtrans/specfun.hpp"

namespace corrtrans::ode {

template <std::size_t N>
using State = std::array<double, N>;

namespace detail {

inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

template <std::size_t N>
State<N> axpy(const State<N>& y, double h, std::initializer_list<std::pair<double, const State<N>*>> terms) {
  State<N> out = y;
  for (const auto& [coef, k] : terms) {
    for (std::size_t i = 0; i < N; ++i) out[i] += h * coef * (*k)[i];
  }
  return out;
}

}  // namespace detail

/// One Dormand-Prince step of size h from (t, y). Writes the embedded
/// 4th/5th-order difference into *error when non-null.
template <std::size_t N, typename F>
State<N> dopri_step(F& f, double t, const State<N>& y, double h, State<N>* error = nullptr) {
  using namespace detail;
  const State<N> k1 = f(t, y);
  const State<N> k2 = f(t + c2 * h, axpy<N>(y, h, {{a21, &k1}}));
  const State<N> k3 = f(t + c3 * h, axpy<N>(y, h, {{a31, &k1}, {a32, &k2}}));
  const State<N> k4 = f(t + c4 * h, axpy<N>(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
  const State<N> k5 = f(t + c5 * h, axpy<N>(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
  const State<N> k6 =
      f(t + h, axpy<N>(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
  const State<N> y5 = axpy<N>(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
  if (error != nullptr) {
    const State<N> k7 = f(t + h, y5);
    for (std::size_t i = 0; i < N; ++i) {
      (*error)[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    }
  }
  return y5;
}

/// Integrates from t0 to t1 (either direction) with per-component error
/// control abs_tol + rel_tol * |y_i|. observer(t, y, h) is called with the
/// initial state (h = 0) and after every accepted step of size h.
/// tol.max_iter bounds the number of attempted steps.
template <std::size_t N, typename F, typename Observer>
State<N> integrate(F&& f, double t0, State<N> y, double t1, const Tolerance& tol, Observer&& observer) {
  tol.validate();
  observer(t0, y, 0.0);
  if (t0 == t1) return y;
  const double direction = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double h = direction * std::min(span, 1e-3 * std::max(span, 1.0));
  double t = t0;
  for (int attempt = 0; attempt < tol.max_iter; ++attempt) {
    const double remaining = t1 - t;
    if (direction * remaining <= 0.0) return y;
    bool last = false;
    if (direction * (t + h - t1) >= 0.0) {
      h = remaining;
      last = true;
    }
    State<N> err{};
    const State<N> next = dopri_step<N>(f, t, y, h, &err);
    double norm = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < N; ++i) {
      if (!std::isfinite(next[i])) finite = false;
      const double scale = tol.abs_tol + tol.rel_tol * std::max(std::abs(y[i]), std::abs(next[i]));
      norm = std::max(norm, std::abs(err[i]) / scale);
    }
    if (!finite) norm = 1e10;
    if (norm <= 1.0) {
      t = last ? t1 : t + h;
      y = next;
      observer(t, y, h);
      if (last) return y;
    }
    const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
    h *= factor;
    if (std::abs(h) < 1e-15 * std::max(1.0, std::abs(t))) {
      throw NumericError("ode::integrate: step size underflow at t = " + std::to_string(t));
    }
  }
  throw NumericError("ode::integrate: no convergence within " + std::to_string(tol.max_iter) + " steps");
}

}  // namespace corrtrans::ode
