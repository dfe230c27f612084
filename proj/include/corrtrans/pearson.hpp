// SPDX-License-Identifier: Apache-2.0
//
// Pearson's R for correlation-parametrized (CP) models: moment-based
// expansion quantities, transforms of R, the optimality ODE
// psi''/psi' = h_z and the standardized statistic tau.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrtrans/edgeworth.hpp"
#include "corrtrans/ode.hpp"
#include "corrtrans/specfun.hpp"

namespace corrtrans {

/// sigma = 0 for the model at this rho (the pair lies on two lines through the origin).
class DegenerateModelError : public NumericError {
public:
  using NumericError::NumericError;
};

inline constexpr int kMaxMomentOrder = 6;

/// Joint moments mu_ij = E Y^i Z^j (i + j <= 6) of a standardized pair at a fixed rho.
class MomentTable {
public:
  MomentTable(double rho, const std::function<double(double, int, int)>& eval) : rho_(rho) {
    for (int i = 0; i <= kMaxMomentOrder; ++i)
      for (int j = 0; i + j <= kMaxMomentOrder; ++j) {
        const double v = eval(rho, i, j);
        if (!std::isfinite(v)) throw DomainError("MomentTable: non-finite moment");
        mu_[i][j] = v;
      }
    constexpr double tol = 1e-12;
    const bool standardized = std::abs(mu_[0][0] - 1.0) < tol && std::abs(mu_[1][0]) < tol &&
                              std::abs(mu_[0][1]) < tol && std::abs(mu_[2][0] - 1.0) < tol &&
                              std::abs(mu_[0][2] - 1.0) < tol && std::abs(mu_[1][1] - rho) < tol;
    if (!standardized) {
      throw DomainError("MomentTable: moments are not those of a standardized pair with correlation rho");
    }
  }

  [[nodiscard]] double rho() const { return rho_; }
  double operator()(int i, int j) const { return mu_[i][j]; }

private:
  double rho_;
  std::array<std::array<double, kMaxMomentOrder + 1>, kMaxMomentOrder + 1> mu_{};
};

/// The moment face of a CP model: rho -> mu_ij(rho).
struct MomentSpec {
  std::function<double(double rho, int i, int j)> eval;

  [[nodiscard]] MomentTable at(double rho) const {
    if (!(rho > -1.0 && rho < 1.0)) throw DomainError("MomentSpec: rho must lie in (-1, 1)");
    return MomentTable(rho, eval);
  }
};

// ---------------------------------------------------------------------------
// Pearson's R
// ---------------------------------------------------------------------------

struct SamplePair {
  double y;
  double z;
};

/// Streaming accumulator for the five sums R depends on.
struct PearsonSums {
  long long n = 0;
  double sy = 0.0;
  double sz = 0.0;
  double syy = 0.0;
  double szz = 0.0;
  double syz = 0.0;

  void add(double y, double z) {
    ++n;
    sy += y;
    sz += z;
    syy += y * y;
    szz += z * z;
    syz += y * z;
  }

  /// Sample correlation; 0 when either sample variance vanishes.
  [[nodiscard]] double r() const {
    const double nn = static_cast<double>(n);
    const double vy = nn * syy - sy * sy;
    const double vz = nn * szz - sz * sz;
    if (!(vy > 0.0) || !(vz > 0.0)) return 0.0;
    const double r = (nn * syz - sy * sz) / (std::sqrt(vy) * std::sqrt(vz));
    return std::clamp(r, -1.0, 1.0);
  }
};

inline double pearson_r(std::span<const SamplePair> samples) {
  if (samples.size() < 2) throw DomainError("pearson_r: at least 2 pairs required");
  PearsonSums sums;
  for (const auto& s : samples) sums.add(s.y, s.z);
  return sums.r();
}

// ---------------------------------------------------------------------------
// Moment-based expansion quantities
// ---------------------------------------------------------------------------

/// sigma = sqrt(E (YZ - rho/2 (Y^2 + Z^2))^2).
inline double sigma_rho(const MomentTable& mu) {
  const double r = mu.rho();
  const double radicand =
      r * r * (mu(0, 4) + 2.0 * mu(2, 2) + mu(4, 0)) - 4.0 * r * (mu(1, 3) + mu(3, 1)) + 4.0 * mu(2, 2);
  if (!(radicand > 0.0)) {
    throw DegenerateModelError("sigma_rho: model is degenerate at rho = " + std::to_string(r));
  }
  return 0.5 * std::sqrt(radicand);
}

inline double sigma_rho(const MomentSpec& m, double rho) { return sigma_rho(m.at(rho)); }

/// E Lambda^3 from the cubic expansion of E W^3, W = YZ - rho/2 (Y^2 + Z^2).
inline double skew_lambda(const MomentTable& mu) {
  const double r = mu.rho();
  const double w3 = mu(3, 3) - 1.5 * r * (mu(2, 4) + mu(4, 2)) +
                    0.75 * r * r * (mu(1, 5) + 2.0 * mu(3, 3) + mu(5, 1)) -
                    r * r * r / 8.0 * (mu(0, 6) + 3.0 * mu(2, 4) + 3.0 * mu(4, 2) + mu(6, 0));
  const double s = sigma_rho(mu);
  return w3 / (s * s * s);
}

inline double skew_lambda(const MomentSpec& m, double rho) { return skew_lambda(m.at(rho)); }

/// Delta~_R(z) = 96 sigma^3 Delta_R(z) / phi(z), as a polynomial in rho, z^2 and mu_ij.
inline double delta_r_tilde(const MomentTable& mu, double z) {
  const double r = mu.rho();
  const double s = sigma_rho(mu);
  const double s2 = s * s;
  const double z2 = z * z;
  const double w = z2 - 1.0;
  auto m = [&mu](int i, int j) { return mu(i, j); };

  double t = 16.0 * (w * (6.0 * m(1, 2) * m(2, 1) - m(3, 3)) + 3.0 * s2 * z2 * (m(1, 3) + m(3, 1)));

  t -= 12.0 * r *
       (w * (4.0 * m(0, 3) * m(2, 1) + 4.0 * m(1, 2) * m(3, 0) + 8.0 * m(1, 2) * m(1, 2) -
             2.0 * m(1, 3) * m(3, 1) + m(1, 3) * m(1, 3) + 8.0 * m(2, 1) * m(2, 1) - 2.0 * m(2, 4) +
             m(3, 1) * m(3, 1) - 2.0 * m(4, 2)) +
        s2 * ((2.0 * z2 + 1.0) * (m(0, 4) + m(4, 0)) + (4.0 * z2 - 2.0) * m(2, 2)));

  t += 12.0 * r * r * w *
       (2.0 * m(0, 3) * (3.0 * m(1, 2) + m(3, 0)) + m(0, 4) * (m(1, 3) - m(3, 1)) + 10.0 * m(1, 2) * m(2, 1) -
        m(1, 3) * m(4, 0) - m(1, 5) + 6.0 * m(2, 1) * m(3, 0) + m(3, 1) * m(4, 0) - 2.0 * m(3, 3) - m(5, 1));

  t -= r * r * r * w *
       (24.0 * m(0, 3) * m(2, 1) + 12.0 * m(0, 3) * m(0, 3) - 6.0 * m(0, 4) * m(4, 0) + 3.0 * m(0, 4) * m(0, 4) -
        2.0 * m(0, 6) + 24.0 * m(1, 2) * m(3, 0) + 12.0 * m(1, 2) * m(1, 2) + 12.0 * m(2, 1) * m(2, 1) -
        6.0 * m(2, 4) + 12.0 * m(3, 0) * m(3, 0) + 3.0 * m(4, 0) * m(4, 0) - 6.0 * m(4, 2) - 2.0 * m(6, 0));
  return t;
}

inline double delta_r_tilde(const MomentSpec& m, double rho, double z) { return delta_r_tilde(m.at(rho), z); }

/// Delta_R(z) = phi(z) Delta~_R(z) / (96 sigma^3).
inline double delta_r(const MomentTable& mu, double z) {
  const double s = sigma_rho(mu);
  return normal_pdf(z) * delta_r_tilde(mu, z) / (96.0 * s * s * s);
}

/// Right-hand side of psi''/psi' = h_z(rho).
inline double h_z(const MomentTable& mu, double z) {
  if (z == 0.0 || !std::isfinite(z)) throw DomainError("h_z: z must be finite and non-zero");
  const double s = sigma_rho(mu);
  const double s2 = s * s;
  return delta_r_tilde(mu, z) / (48.0 * s2 * s2 * z * z);
}

inline double h_z(const MomentSpec& m, double rho, double z) { return h_z(m.at(rho), z); }

// ---------------------------------------------------------------------------
// Transforms of R
// ---------------------------------------------------------------------------

enum class TransformKind { identity, fisher, optimal, numeric };

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::fisher: return "fisher";
    case TransformKind::optimal: return "optimal";
    case TransformKind::numeric: return "numeric";
  }
  return "unknown";
}

inline TransformKind parse_transform_kind(const std::string& s) {
  if (s == "identity" || s == "R") return TransformKind::identity;
  if (s == "fisher" || s == "R_F") return TransformKind::fisher;
  if (s == "optimal" || s == "psi") return TransformKind::optimal;
  if (s == "numeric") return TransformKind::numeric;
  throw DomainError("unknown transform '" + s + "'");
}

/// A transform psi of R with psi(0) = 0, psi'(0) = 1 and psi' > 0 on (-1, 1).
/// z_ref is the reference critical value for optimal/numeric kinds, NaN otherwise.
struct Transform {
  TransformKind kind = TransformKind::identity;
  double z_ref = std::numeric_limits<double>::quiet_NaN();
  std::function<double(double)> psi;
  std::function<double(double)> dpsi;
  std::function<double(double)> d2psi;
};

inline Transform identity_transform() {
  return {TransformKind::identity, std::numeric_limits<double>::quiet_NaN(), [](double r) { return r; },
          [](double) { return 1.0; }, [](double) { return 0.0; }};
}

/// Largest |rho| at which ODE-based transforms may be evaluated.
inline constexpr double kNumericRhoLimit = 1.0 - 1e-6;

namespace detail {

// Accepted Runge-Kutta nodes of (psi, psi') from 0 towards +-kNumericRhoLimit.
// Evaluation restarts one step from the nearest node at or below |rho|.
class OdeTransformTable {
public:
  OdeTransformTable(MomentSpec moments, double z, const Tolerance& tol) : moments_(std::move(moments)), z_(z) {
    tol.validate();
    for (const double end : {kNumericRhoLimit, -kNumericRhoLimit}) {
      Side& side = end > 0 ? positive_ : negative_;
      try {
        ode::integrate<2>([this](double t, const ode::State<2>& y) { return derivative(t, y); }, 0.0,
                          ode::State<2>{0.0, 1.0}, end, tol,
                          [&side](double t, const ode::State<2>& y, double) { side.nodes.push_back({t, y[0], y[1]}); });
      } catch (const NumericError& e) {
        // h_z loses precision as |rho| -> 1; keep the range that converged.
        side.failure = e.what();
      }
    }
  }

  [[nodiscard]] ode::State<2> eval(double rho) const {
    if (!(std::abs(rho) <= kNumericRhoLimit)) {
      throw DomainError("numeric transform: |rho| must not exceed 1 - 1e-6");
    }
    const Side& side = rho >= 0.0 ? positive_ : negative_;
    const auto& nodes = side.nodes;
    const double target = std::abs(rho);
    if (!side.failure.empty() && target > std::abs(nodes.back().rho)) {
      throw NumericError("numeric transform: integration did not converge beyond |rho| = " +
                         std::to_string(std::abs(nodes.back().rho)) + " (" + side.failure + ")");
    }
    auto it = std::upper_bound(nodes.begin(), nodes.end(), target,
                               [](double v, const Node& n) { return v < std::abs(n.rho); });
    const Node& base = *std::prev(it);
    ode::State<2> y{base.psi, base.dpsi};
    if (rho == base.rho) return y;
    auto f = [this](double t, const ode::State<2>& s) { return derivative(t, s); };
    return ode::dopri_step<2>(f, base.rho, y, rho - base.rho);
  }

  [[nodiscard]] double h(double rho) const { return h_z(moments_.at(rho), z_); }

private:
  struct Node {
    double rho;
    double psi;
    double dpsi;
  };

  [[nodiscard]] ode::State<2> derivative(double t, const ode::State<2>& y) const { return {y[1], h(t) * y[1]}; }

  struct Side {
    std::vector<Node> nodes;
    std::string failure;
  };

  MomentSpec moments_;
  double z_;
  Side positive_;
  Side negative_;
};

}  // namespace detail

/// psi_z solving psi''/psi' = h_z with psi(0) = 0, psi'(0) = 1, integrated by
/// adaptive Runge-Kutta over |rho| <= 1 - 1e-6. Where the integrator fails to
/// converge (close to |rho| = 1), evaluation beyond the last accepted node
/// throws NumericError.
inline Transform optimal_transform_numeric(const MomentSpec& m, double z,
                                           const Tolerance& tol = Tolerance{1e-13, 1e-12, 20000}) {
  if (z == 0.0 || !std::isfinite(z)) throw DomainError("optimal_transform_numeric: z must be finite and non-zero");
  auto table = std::make_shared<const detail::OdeTransformTable>(m, z, tol);
  Transform t;
  t.kind = TransformKind::numeric;
  t.z_ref = z;
  t.psi = [table](double r) { return table->eval(r)[0]; };
  t.dpsi = [table](double r) { return table->eval(r)[1]; };
  t.d2psi = [table](double r) { return table->h(r) * table->eval(r)[1]; };
  return t;
}

/// Leading error term of the transformed statistic:
/// Delta_psi(z) = Delta_R(z) - psi''(rho) / (2 psi'(rho)) sigma z^2 phi(z).
inline double delta_psi(const MomentSpec& m, const Transform& t, double rho, double z) {
  const MomentTable mu = m.at(rho);
  const double s = sigma_rho(mu);
  return delta_r(mu, z) - t.d2psi(rho) / (2.0 * t.dpsi(rho)) * s * z * z * normal_pdf(z);
}

/// tau = (psi(r) - psi(rho)) sqrt(n) / (psi'(rho) sigma), with psi(rho) and
/// psi'(rho) fixed at construction.
class TauStatistic {
public:
  TauStatistic(Transform t, double rho, double sigma, long long n) : t_(std::move(t)) {
    if (!(rho > -1.0 && rho < 1.0)) throw DomainError("tau: rho must lie in (-1, 1)");
    if (!(sigma > 0.0)) throw DomainError("tau: sigma must be positive");
    if (n < 1) throw DomainError("tau: n must be >= 1");
    psi_rho_ = t_.psi(rho);
    scale_ = std::sqrt(static_cast<double>(n)) / (t_.dpsi(rho) * sigma);
  }

  double operator()(double r) const {
    if (!(r >= -1.0 && r <= 1.0)) throw DomainError("tau: r must lie in [-1, 1]");
    const double pr = t_.psi(r);
    if (std::isinf(pr)) return pr;
    return (pr - psi_rho_) * scale_;
  }

private:
  Transform t_;
  double psi_rho_ = 0.0;
  double scale_ = 0.0;
};

inline double tau(const Transform& t, double r, double rho, double sigma, long long n) {
  return TauStatistic(t, rho, sigma, n)(r);
}

// ---------------------------------------------------------------------------
// R - rho = f(mean V) with V = (Y, Z, Y^2 - 1, Z^2 - 1, YZ - rho)
// ---------------------------------------------------------------------------

/// f(v) = (rho + v5 - v1 v2) / (sqrt(1 + v3 - v1^2) sqrt(1 + v4 - v2^2)) - rho,
/// evaluated without cancellation near v = 0 so that finite differences of f
/// are limited by truncation rather than rounding.
inline double pearson_smooth_f(double rho, const std::array<double, 5>& v) {
  const double ey = v[2] - v[0] * v[0];  // dy - 1
  const double ez = v[3] - v[1] * v[1];
  if (!(1.0 + ey > 0.0) || !(1.0 + ez > 0.0)) return 0.0;
  const double sy = std::sqrt(1.0 + ey);
  const double sz = std::sqrt(1.0 + ez);
  const double gy = ey / (sy + 1.0);  // sqrt(dy) - 1
  const double gz = ez / (sz + 1.0);
  const double prod_minus_one = gy + gz + gy * gz;
  return (v[4] - v[0] * v[1] - rho * prod_minus_one) / (sy * sz);
}

/// Edgeworth bundle (L, H, Sigma, sigma, E Lambda^3) of R at rho. H is the
/// symmetrized central-difference Hessian of f with step 1e-5.
inline EdgeworthModel assemble_statistic_model(const MomentSpec& m, double rho) {
  const MomentTable mu = m.at(rho);
  constexpr int p = 5;
  // V_k = Y^{ey} Z^{ez} - c
  struct Component {
    int ey;
    int ez;
    double c;
  };
  const std::array<Component, p> comp{{{1, 0, 0.0}, {0, 1, 0.0}, {2, 0, 1.0}, {0, 2, 1.0}, {1, 1, rho}}};

  DenseMatrix sigma_mat(p);
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) {
      const auto& A = comp[a];
      const auto& B = comp[b];
      sigma_mat(a, b) = mu(A.ey + B.ey, A.ez + B.ez) - A.c * mu(B.ey, B.ez) - B.c * mu(A.ey, A.ez) + A.c * B.c;
    }

  std::vector<double> gradient{0.0, 0.0, -rho / 2.0, -rho / 2.0, 1.0};

  constexpr double h = 1e-5;
  DenseMatrix hess(p);
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) {
      auto f_at = [&](double da, double db) {
        std::array<double, 5> v{};
        v[a] += da;
        v[b] += db;
        return pearson_smooth_f(rho, v);
      };
      hess(a, b) = (f_at(h, h) - f_at(h, -h) - f_at(-h, h) + f_at(-h, -h)) / (4.0 * h * h);
    }
  DenseMatrix sym(p);
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) sym(a, b) = 0.5 * (hess(a, b) + hess(b, a));

  return {std::move(gradient), std::move(sym), std::move(sigma_mat), sigma_rho(mu), skew_lambda(mu)};
}

}  // namespace corrtrans
