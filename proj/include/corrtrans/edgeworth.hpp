// SPDX-License-Identifier: Apache-2.0
//
// Leading 1/sqrt(n) Edgeworth correction for T_n = sqrt(n) f(mean V) / sigma,
// where f is smooth with f(0) = 0 and V is a zero-mean random vector.
//
//   P(T_n <= z) = Phi(z) + Delta(z) / sqrt(n) + o(1/sqrt(n)),
//   Delta(z)    = -[(E Lambda^3 / 6 + a3)(z^2 - 1) + a1] phi(z).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "corrtrans/specfun.hpp"

namespace corrtrans {

/// Dense row-major square matrix; the statistics handled here have dim <= 5.
class DenseMatrix {
public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}

  static DenseMatrix identity(std::size_t dim) {
    DenseMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  [[nodiscard]] std::size_t dim() const { return dim_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  [[nodiscard]] DenseMatrix operator*(const DenseMatrix& rhs) const {
    DenseMatrix out(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t k = 0; k < dim_; ++k)
        for (std::size_t j = 0; j < dim_; ++j) out(i, j) += (*this)(i, k) * rhs(k, j);
    return out;
  }

  [[nodiscard]] std::vector<double> operator*(const std::vector<double>& v) const {
    std::vector<double> out(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) out[i] += (*this)(i, j) * v[j];
    return out;
  }

  [[nodiscard]] double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
  }

  [[nodiscard]] double max_asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = i + 1; j < dim_; ++j) worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
    return worst;
  }

private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Law summaries of V and the derivatives of f at 0 that determine Delta(z):
/// gradient L, Hessian H, covariance Sigma = E V V^T, sigma = sqrt(L^T Sigma L)
/// and skew = E Lambda^3 with Lambda = L^T V / sigma.
class EdgeworthModel {
public:
  EdgeworthModel(std::vector<double> gradient, DenseMatrix hessian, DenseMatrix covariance, double sigma,
                 double skew)
      : gradient_(std::move(gradient)),
        hessian_(std::move(hessian)),
        covariance_(std::move(covariance)),
        sigma_(sigma),
        skew_(skew) {
    const std::size_t p = gradient_.size();
    if (p == 0) throw DomainError("EdgeworthModel: dimension must be positive");
    if (hessian_.dim() != p || covariance_.dim() != p) {
      throw DomainError("EdgeworthModel: gradient, Hessian and covariance dimensions differ");
    }
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw DomainError("EdgeworthModel: sigma must be positive");
    if (!std::isfinite(skew_)) throw DomainError("EdgeworthModel: skew must be finite");
    if (covariance_.max_asymmetry() > 1e-10) throw DomainError("EdgeworthModel: covariance is not symmetric");
    const double quad = dot(gradient_, covariance_ * gradient_);
    if (std::abs(sigma_ * sigma_ - quad) > 1e-10 * std::max(quad, sigma_ * sigma_)) {
      throw DomainError("EdgeworthModel: sigma^2 != L^T Sigma L (" + std::to_string(sigma_ * sigma_) +
                        " vs " + std::to_string(quad) + ")");
    }
  }

  /// sigma taken as sqrt(L^T Sigma L).
  static EdgeworthModel from_moments(std::vector<double> gradient, DenseMatrix hessian, DenseMatrix covariance,
                                     double skew) {
    const double quad = dot(gradient, covariance * gradient);
    if (!(quad > 0.0)) throw NumericError("EdgeworthModel: L^T Sigma L must be positive");
    return {std::move(gradient), std::move(hessian), std::move(covariance), std::sqrt(quad), skew};
  }

  [[nodiscard]] std::size_t dim() const { return gradient_.size(); }
  [[nodiscard]] const std::vector<double>& gradient() const { return gradient_; }
  [[nodiscard]] const DenseMatrix& hessian() const { return hessian_; }
  [[nodiscard]] const DenseMatrix& covariance() const { return covariance_; }
  [[nodiscard]] double sigma() const { return sigma_; }
  [[nodiscard]] double skew() const { return skew_; }

private:
  std::vector<double> gradient_;
  DenseMatrix hessian_;
  DenseMatrix covariance_;
  double sigma_;
  double skew_;
};

/// a1 = tr(H Sigma) / (2 sigma).
inline double coeff_a1(const EdgeworthModel& m) {
  return (m.hessian() * m.covariance()).trace() / (2.0 * m.sigma());
}

/// a3 = (L^T Sigma L - sigma^2) tr(H Sigma) / (4 sigma^3) + L^T Sigma H Sigma L / (2 sigma^3).
/// The first summand vanishes whenever sigma^2 = L^T Sigma L; it is kept so the
/// expression matches the general form.
inline double coeff_a3(const EdgeworthModel& m) {
  const auto& L = m.gradient();
  const double s = m.sigma();
  const double s3 = s * s * s;
  const std::vector<double> sigma_l = m.covariance() * L;
  const double quad = dot(L, sigma_l);
  const double tr = (m.hessian() * m.covariance()).trace();
  return (quad - s * s) * tr / (4.0 * s3) + dot(sigma_l, m.hessian() * sigma_l) / (2.0 * s3);
}

/// Coefficients of Delta(z) = (A z^2 + B) phi(z).
struct DeltaCoefficients {
  double A;
  double B;
};

inline DeltaCoefficients delta_coefficients(const EdgeworthModel& m) {
  const double A = -(m.skew() / 6.0 + coeff_a3(m));
  return {A, -A - coeff_a1(m)};
}

inline double delta(const EdgeworthModel& m, double z) {
  if (!std::isfinite(z)) throw DomainError("delta: z must be finite");
  return -((m.skew() / 6.0 + coeff_a3(m)) * (z * z - 1.0) + coeff_a1(m)) * normal_pdf(z);
}

/// Second-order approximation of P(T_n > z): 1 - Phi(z) - Delta(z)/sqrt(n), clamped to [0, 1].
inline double edgeworth_tail(const EdgeworthModel& m, double z, long long n) {
  if (n < 1) throw DomainError("edgeworth_tail: n must be >= 1");
  const double tail = normal_sf(z) - delta(m, z) / std::sqrt(static_cast<double>(n));
  return std::clamp(tail, 0.0, 1.0);
}

}  // namespace corrtrans
