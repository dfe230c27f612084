// SPDX-License-Identifier: Apache-2.0
//
// The two built-in CP models: the standardized bivariate normal (BVN) and
// the four-point SquareV law on the vertices of [-1, 1]^2. For each: joint
// moments, samplers, the closed-form optimal transform
//
//   psi_z(rho) = integral_0^rho (1 - r^2)^e dr = rho 2F1(1/2, -e; 3/2; rho^2),
//   e = 1/(2 z^2) - 1 (BVN),  e = 1/(3 z^2) - 1/3 (SquareV),
//
// closed-form leading error terms, dominance ranges and an exact
// enumeration oracle for SquareV rejection probabilities.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "corrtrans/pearson.hpp"
#include "corrtrans/rng.hpp"
#include "corrtrans/specfun.hpp"

namespace corrtrans {

enum class ModelKind { bvn, squarev };

inline std::string to_string(ModelKind k) { return k == ModelKind::bvn ? "bvn" : "squarev"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "bvn" || s == "BVN") return ModelKind::bvn;
  if (s == "squarev" || s == "SquareV") return ModelKind::squarev;
  throw DomainError("unknown model '" + s + "' (expected bvn or squarev)");
}

namespace detail {

inline void check_orders(int i, int j) {
  if (i < 0 || j < 0 || i + j > kMaxMomentOrder) throw DomainError("moment orders must satisfy i, j >= 0, i + j <= 6");
}

inline double check_open_rho(double rho, const char* what) {
  if (!(rho > -1.0 && rho < 1.0)) throw DomainError(std::string(what) + ": rho must lie in (-1, 1)");
  return rho;
}

inline constexpr std::array<double, 7> kNormalMoments{1, 0, 1, 0, 3, 0, 15};

inline double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

}  // namespace detail

/// E Y^i Z^j for the standardized BVN with correlation rho.
inline double bvn_moments(double rho, int i, int j) {
  detail::check_orders(i, j);
  detail::check_open_rho(rho, "bvn_moments");
  const double c2 = 1.0 - rho * rho;
  double sum = 0.0;
  for (int k = 0; k <= j; ++k) {
    if ((j - k) % 2 != 0) continue;  // m(odd) = 0
    sum += detail::binomial(j, k) * std::pow(rho, k) * std::pow(c2, (j - k) / 2) *
           detail::kNormalMoments[i + k] * detail::kNormalMoments[j - k];
  }
  return sum;
}

/// E Y^i Z^j for SquareV: (1 - rho)[i even][j even] + rho [i + j even].
inline double squarev_moments(double rho, int i, int j) {
  detail::check_orders(i, j);
  detail::check_open_rho(rho, "squarev_moments");
  const double both_even = (i % 2 == 0 && j % 2 == 0) ? 1.0 : 0.0;
  const double sum_even = ((i + j) % 2 == 0) ? 1.0 : 0.0;
  return (1.0 - rho) * both_even + rho * sum_even;
}

struct DependenceModel {
  ModelKind kind;
  MomentSpec moments;

  [[nodiscard]] std::string name() const { return to_string(kind); }
};

inline DependenceModel bvn_model() { return {ModelKind::bvn, MomentSpec{bvn_moments}}; }
inline DependenceModel squarev_model() { return {ModelKind::squarev, MomentSpec{squarev_moments}}; }
inline DependenceModel make_model(ModelKind k) { return k == ModelKind::bvn ? bvn_model() : squarev_model(); }

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// Y ~ N(0,1), Z = rho Y + sqrt(1 - rho^2) Y1.
struct BvnDraw {
  double rho;
  double c;

  explicit BvnDraw(double r) : rho(r), c(std::sqrt(1.0 - r * r)) { detail::check_open_rho(r, "sample_bvn"); }

  template <typename Rng>
  SamplePair operator()(Rng& g) const {
    const auto [u, v] = normal_pair(g);
    return {u, rho * u + c * v};
  }
};

/// Inverse-CDF draw over the cells (1,1), (1,-1), (-1,1), (-1,-1) with
/// probabilities ((1+rho)/4, (1-rho)/4, (1-rho)/4, (1+rho)/4).
struct SquareVDraw {
  double c1;
  double c2;
  double c3;

  explicit SquareVDraw(double rho) {
    detail::check_open_rho(rho, "sample_squarev");
    const double same = (1.0 + rho) / 4.0;
    const double diff = (1.0 - rho) / 4.0;
    c1 = same;
    c2 = same + diff;
    c3 = same + 2.0 * diff;
  }

  template <typename Rng>
  SamplePair operator()(Rng& g) const {
    const double u = g.uniform01();
    if (u < c1) return {1.0, 1.0};
    if (u < c2) return {1.0, -1.0};
    if (u < c3) return {-1.0, 1.0};
    return {-1.0, -1.0};
  }
};

/// BVN correlation theta whose sign pattern has SquareV law with correlation rho.
inline double squarev_sign_theta(double rho) { return std::cos(std::numbers::pi / 2.0 * (1.0 - rho)); }

/// SquareV via (sign U, sign V) of a BVN pair with correlation theta = cos(pi (1 - rho) / 2).
struct SquareVSignDraw {
  BvnDraw bvn;

  explicit SquareVSignDraw(double rho) : bvn(squarev_sign_theta(detail::check_open_rho(rho, "sample_squarev"))) {}

  template <typename Rng>
  SamplePair operator()(Rng& g) const {
    const SamplePair p = bvn(g);
    return {p.y >= 0.0 ? 1.0 : -1.0, p.z >= 0.0 ? 1.0 : -1.0};
  }
};

template <typename Draw, typename Rng>
std::vector<SamplePair> draw_n(const Draw& draw, long long n, Rng& g) {
  if (n < 1) throw DomainError("sampler: n must be >= 1");
  std::vector<SamplePair> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) out.push_back(draw(g));
  return out;
}

template <typename Rng>
std::vector<SamplePair> sample_bvn(double rho, long long n, Rng& g) {
  return draw_n(BvnDraw(rho), n, g);
}

template <typename Rng>
std::vector<SamplePair> sample_squarev(double rho, long long n, Rng& g) {
  return draw_n(SquareVDraw(rho), n, g);
}

template <typename Rng>
std::vector<SamplePair> sample_squarev_sign(double rho, long long n, Rng& g) {
  return draw_n(SquareVSignDraw(rho), n, g);
}

template <typename Rng>
std::vector<SamplePair> sample(const DependenceModel& model, double rho, long long n, Rng& g) {
  return model.kind == ModelKind::bvn ? sample_bvn(rho, n, g) : sample_squarev(rho, n, g);
}

// ---------------------------------------------------------------------------
// Closed-form transforms
// ---------------------------------------------------------------------------

/// Exponent e with psi_z'(rho) = (1 - rho^2)^e.
inline double optimal_exponent(ModelKind model, double z) {
  if (z == 0.0 || !std::isfinite(z)) throw DomainError("optimal transform: z must be finite and non-zero");
  const double z2 = z * z;
  return model == ModelKind::bvn ? 1.0 / (2.0 * z2) - 1.0 : 1.0 / (3.0 * z2) - 1.0 / 3.0;
}

inline double psi_closed(ModelKind model, double z, double rho) {
  const double e = optimal_exponent(model, z);
  if (!(std::abs(rho) <= 1.0)) throw DomainError("psi_closed: |rho| must not exceed 1");
  if (std::abs(rho) == 1.0) return std::copysign(gamma_ratio_endpoint(e), rho);
  return rho * gauss_2f1_half(e, rho * rho);
}

inline double psi_closed(const DependenceModel& model, double z, double rho) { return psi_closed(model.kind, z, rho); }

inline Transform optimal_transform(ModelKind model, double z) {
  const double e = optimal_exponent(model, z);
  Transform t;
  t.kind = TransformKind::optimal;
  t.z_ref = z;
  t.psi = [model, z](double r) { return psi_closed(model, z, r); };
  t.dpsi = [e](double r) { return std::pow((1.0 - r) * (1.0 + r), e); };
  t.d2psi = [e](double r) { return -2.0 * e * r * std::pow((1.0 - r) * (1.0 + r), e - 1.0); };
  return t;
}

/// Fisher's z: atanh(rho), +-infinity at rho = +-1.
inline double fisher(double rho) {
  if (!(std::abs(rho) <= 1.0)) throw DomainError("fisher: |rho| must not exceed 1");
  if (rho == 1.0) return std::numeric_limits<double>::infinity();
  if (rho == -1.0) return -std::numeric_limits<double>::infinity();
  return 0.5 * std::log((1.0 + rho) / (1.0 - rho));
}

inline Transform fisher_transform() {
  return {TransformKind::fisher, std::numeric_limits<double>::quiet_NaN(), [](double r) { return fisher(r); },
          [](double r) { return 1.0 / ((1.0 - r) * (1.0 + r)); },
          [](double r) {
            const double d = (1.0 - r) * (1.0 + r);
            return 2.0 * r / (d * d);
          }};
}

/// Transform of the requested kind for the model; z_ref is used by optimal/numeric kinds.
inline Transform make_transform(const DependenceModel& model, TransformKind kind, double z_ref) {
  switch (kind) {
    case TransformKind::identity: return identity_transform();
    case TransformKind::fisher: return fisher_transform();
    case TransformKind::optimal: return optimal_transform(model.kind, z_ref);
    case TransformKind::numeric: return optimal_transform_numeric(model.moments, z_ref);
  }
  throw DomainError("make_transform: unknown kind");
}

// ---------------------------------------------------------------------------
// Closed-form leading error terms
// ---------------------------------------------------------------------------

namespace detail {

// Delta(z) / phi(z).
inline double delta_closed_shape(ModelKind model, TransformKind kind, double z, double rho, double z_ref) {
  check_open_rho(rho, "delta_closed");
  if (!std::isfinite(z)) throw DomainError("delta_closed: z must be finite");
  const double z2 = z * z;
  const double c = model == ModelKind::bvn ? rho / 2.0 : rho / (3.0 * std::sqrt((1.0 - rho) * (1.0 + rho)));
  switch (kind) {
    case TransformKind::identity: return model == ModelKind::bvn ? c * (2.0 * z2 - 1.0) : c * (z2 - 1.0);
    case TransformKind::fisher: return model == ModelKind::bvn ? -c : -c * (2.0 * z2 + 1.0);
    case TransformKind::optimal:
      if (z_ref == 0.0 || !std::isfinite(z_ref)) throw DomainError("delta_closed: optimal kind needs a non-zero z_ref");
      return c * (z2 / (z_ref * z_ref) - 1.0);
    case TransformKind::numeric: break;
  }
  throw DomainError("delta_closed: no closed form for transform kind '" + to_string(kind) + "'");
}

}  // namespace detail

/// Closed-form Delta_{psi(R)}(z) including the phi(z) factor.
inline double delta_closed(ModelKind model, TransformKind kind, double z, double rho,
                           double z_ref = std::numeric_limits<double>::quiet_NaN()) {
  return detail::delta_closed_shape(model, kind, z, rho, z_ref) * normal_pdf(z);
}

inline double delta_closed(const DependenceModel& model, TransformKind kind, double z, double rho,
                           double z_ref = std::numeric_limits<double>::quiet_NaN()) {
  return delta_closed(model.kind, kind, z, rho, z_ref);
}

// ---------------------------------------------------------------------------
// Dominance ranges
// ---------------------------------------------------------------------------

struct BetaInterval {
  double lo;
  double hi;
};

namespace detail {

// |Delta_opt| - |Delta_comp| divided by phi(z) |rho-factor|, as a function of t = z^2.
inline double dominance_gap(ModelKind model, TransformKind competitor, double z_alpha, double t) {
  const double z = std::sqrt(t);
  constexpr double rho = 0.5;
  return std::abs(delta_closed_shape(model, TransformKind::optimal, z, rho, z_alpha)) -
         std::abs(delta_closed_shape(model, competitor, z, rho, z_alpha));
}

// Root of g between inside (g < 0) and outside (g >= 0) by bisection.
template <typename G>
double bisect_boundary(G&& g, double inside, double outside) {
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) return mid;
    const double v = g(mid);
    if (std::abs(v) < 1e-12) return mid;
    (v < 0.0 ? inside : outside) = mid;
  }
  return 0.5 * (inside + outside);
}

inline void check_competitor(TransformKind competitor) {
  if (competitor != TransformKind::identity && competitor != TransformKind::fisher) {
    throw DomainError("dominance_range: competitor must be identity or fisher");
  }
}

}  // namespace detail

/// Maximal interval of beta in (0, 1/2) containing alpha on which the
/// alpha-optimal transform has a smaller |Delta(z_beta)| than the competitor.
/// Boundaries are located by bisection in t = z_beta^2 over (1e-8, 50).
inline BetaInterval dominance_range(ModelKind model, double alpha, TransformKind competitor) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw DomainError("dominance_range: alpha must lie in (0, 0.5)");
  detail::check_competitor(competitor);
  const double z_alpha = normal_quantile(1.0 - alpha);
  const double t_alpha = z_alpha * z_alpha;
  auto g = [&](double t) { return detail::dominance_gap(model, competitor, z_alpha, t); };
  if (!(g(t_alpha) < 0.0)) {
    throw DomainError("dominance_range: the competitor is itself optimal at this alpha");
  }
  constexpr double t_min = 1e-8;
  constexpr double t_max = 50.0;
  constexpr int grid = 20000;
  const double step = (t_max - t_min) / grid;

  // Upper boundary in t (small beta side).
  double beta_lo = 0.0;
  for (double prev = t_alpha, t = t_alpha + step;; prev = t, t += step) {
    t = std::min(t, t_max);
    if (g(t) >= 0.0) {
      beta_lo = normal_sf(std::sqrt(detail::bisect_boundary(g, prev, t)));
      break;
    }
    if (t == t_max) break;
  }
  // Lower boundary in t (large beta side).
  double beta_hi = 0.5;
  for (double prev = t_alpha, t = t_alpha - step;; prev = t, t -= step) {
    t = std::max(t, t_min);
    if (g(t) >= 0.0) {
      beta_hi = normal_sf(std::sqrt(detail::bisect_boundary(g, prev, t)));
      break;
    }
    if (t == t_min) break;
  }
  return {beta_lo, beta_hi};
}

inline BetaInterval dominance_range(const DependenceModel& model, double alpha, TransformKind competitor) {
  return dominance_range(model.kind, alpha, competitor);
}

/// Supremum of alpha in (0, 1/2) for which the alpha-optimal transform beats
/// the competitor at every sufficiently small beta (the dominance range
/// reaches beta = 0). Decided from the large-t slopes of |Delta|/phi, located
/// by bisection on alpha. Empty when no such alpha exists.
inline std::optional<double> dominance_threshold(ModelKind model, TransformKind competitor) {
  detail::check_competitor(competitor);
  auto lead = [&](double alpha) {
    const double z_alpha = normal_quantile(1.0 - alpha);
    constexpr double t1 = 1e6;
    constexpr double t2 = 2e6;
    return (detail::dominance_gap(model, competitor, z_alpha, t2) -
            detail::dominance_gap(model, competitor, z_alpha, t1)) /
           (t2 - t1);
  };
  double inside = 1e-12;
  double outside = 0.5 - 1e-12;
  if (!(lead(inside) < 0.0)) return std::nullopt;
  if (lead(outside) < 0.0) return std::nullopt;
  for (int iter = 0; iter < 200 && outside - inside > 1e-15; ++iter) {
    const double mid = 0.5 * (inside + outside);
    (lead(mid) < 0.0 ? inside : outside) = mid;
  }
  return 0.5 * (inside + outside);
}

// ---------------------------------------------------------------------------
// Exact SquareV rejection probability
// ---------------------------------------------------------------------------

inline constexpr long long kMaxExactSampleSize = 200;

/// P(tau > z_alpha) under SquareV(rho) for samples of size n, by enumerating
/// all cell-count vectors (n_{1,1}, n_{1,-1}, n_{-1,1}, n_{-1,-1}) with their
/// multinomial probabilities. tau uses sigma(rho) and psi'(rho) at the true rho.
inline double squarev_exact_rejection(double rho, long long n, const Transform& t, double alpha) {
  detail::check_open_rho(rho, "squarev_exact_rejection");
  if (n < 1) throw DomainError("squarev_exact_rejection: n must be >= 1");
  if (n > kMaxExactSampleSize) throw DomainError("squarev_exact_rejection: n must not exceed 200");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("squarev_exact_rejection: alpha must lie in (0, 1)");
  const double z_alpha = normal_quantile(1.0 - alpha);
  const double sigma = sigma_rho(squarev_model().moments, rho);
  const TauStatistic tau_stat(t, rho, sigma, n);

  std::vector<double> log_fact(static_cast<std::size_t>(n) + 1, 0.0);
  for (long long k = 1; k <= n; ++k) log_fact[k] = log_fact[k - 1] + std::log(static_cast<double>(k));
  const double log_same = std::log((1.0 + rho) / 4.0);
  const double log_diff = std::log((1.0 - rho) / 4.0);

  std::unordered_map<std::uint64_t, bool> rejects_at;
  auto rejects = [&](double r) {
    std::uint64_t key;
    std::memcpy(&key, &r, sizeof key);
    auto it = rejects_at.find(key);
    if (it != rejects_at.end()) return it->second;
    const bool rej = tau_stat(r) > z_alpha;
    rejects_at.emplace(key, rej);
    return rej;
  };

  double total = 0.0;
  for (long long a = 0; a <= n; ++a)            // (1, 1)
    for (long long b = 0; a + b <= n; ++b)      // (1, -1)
      for (long long c = 0; a + b + c <= n; ++c) {  // (-1, 1)
        const long long d = n - a - b - c;      // (-1, -1)
        PearsonSums sums;
        sums.n = n;
        sums.sy = static_cast<double>(a + b - c - d);
        sums.sz = static_cast<double>(a - b + c - d);
        sums.syy = static_cast<double>(n);
        sums.szz = static_cast<double>(n);
        sums.syz = static_cast<double>(a + d - b - c);
        if (!rejects(sums.r())) continue;
        total += std::exp(log_fact[n] - log_fact[a] - log_fact[b] - log_fact[c] - log_fact[d] +
                          static_cast<double>(a + d) * log_same + static_cast<double>(b + c) * log_diff);
      }
  return std::min(total, 1.0);
}

}  // namespace corrtrans
