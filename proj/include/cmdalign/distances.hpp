#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cmdalign/errors.hpp"
#include "cmdalign/moments.hpp"
#include "cmdalign/numerics.hpp"

namespace cmdalign {

struct CmdConfig {
  int k = 5;
  // Per-order weights a_1..a_k. Empty means all ones.
  std::vector<double> weights{};
  MonomialMode mode = MonomialMode::marginal;

  void validate() const {
    if (k < 1) throw DomainError("CmdConfig: k must be >= 1");
    if (!weights.empty() && weights.size() != static_cast<std::size_t>(k))
      throw DomainError("CmdConfig: weights must have k entries");
    for (double w : weights)
      if (!(w >= 0.0)) throw DomainError("CmdConfig: weights must be >= 0");
  }

  double weight(int j) const {
    return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(j - 1)];
  }
};

struct DistanceReport {
  std::string metric;
  double value = 0.0;
  // Weighted per-order contributions; only filled for CMD.
  std::vector<double> terms;
};

// sum_j a_j * ||a.c_j - b.c_j||_2
inline DistanceReport cmd_from_moments(const CentralMomentVector& a, const CentralMomentVector& b,
                                       const CmdConfig& cfg) {
  cfg.validate();
  detail::require_dims(a.order() >= cfg.k && b.order() >= cfg.k, "cmd: not enough moment orders");
  DistanceReport r{"cmd", 0.0, {}};
  r.terms.reserve(static_cast<std::size_t>(cfg.k));
  for (int j = 1; j <= cfg.k; ++j) {
    const Vector& ca = a.at(j);
    const Vector& cb = b.at(j);
    detail::require_dims(ca.size() == cb.size(), "cmd: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) {
      const double diff = ca[i] - cb[i];
      s += diff * diff;
    }
    const double term = cfg.weight(j) * std::sqrt(s);
    r.terms.push_back(term);
    r.value += term;
  }
  return r;
}

// Linear in |src| + |tgt|: one pass per sample to build the moment vectors.
inline DistanceReport cmd_estimate(const DenseMatrix& src, const DenseMatrix& tgt,
                                   const CmdConfig& cfg = {}) {
  cfg.validate();
  if (src.rows() == 0 || tgt.rows() == 0) throw EmptySampleError("cmd_estimate: empty sample");
  detail::require_dims(src.cols() == tgt.cols(), "cmd_estimate: dimension mismatch");
  return cmd_from_moments(central_moments(src, cfg.k, cfg.mode),
                          central_moments(tgt, cfg.k, cfg.mode), cfg);
}

// Dual form over exact 1-D moments: a_1|mu1 - mu2| + sum_{j>=2} a_j |c_j(d1) - c_j(d2)|.
inline DistanceReport cmd_analytic(const AnalyticDistribution& d1, const AnalyticDistribution& d2,
                                   const CmdConfig& cfg = {}) {
  cfg.validate();
  DistanceReport r{"cmd", 0.0, {}};
  for (int j = 1; j <= cfg.k; ++j) {
    const double diff = j == 1 ? analytic_mean(d1) - analytic_mean(d2)
                               : analytic_central_moment(d1, j) - analytic_central_moment(d2, j);
    const double term = cfg.weight(j) * std::fabs(diff);
    r.terms.push_back(term);
    r.value += term;
  }
  return r;
}

// IPM over the unit ball of degree-k homogeneous polynomials in 1-D:
// |E_1[x^k] - E_2[x^k]|.
inline double raw_moment_ipm(const AnalyticDistribution& d1, const AnalyticDistribution& d2, int k) {
  detail::check_order(k);
  return std::fabs(analytic_raw_moment(d1, k) - analytic_raw_moment(d2, k));
}

// Sample version: ||E_src[nu(x)] - E_tgt[nu(x)]||_2 (no centring).
inline double raw_moment_ipm_estimate(const DenseMatrix& src, const DenseMatrix& tgt, int k,
                                      MonomialMode mode = MonomialMode::full) {
  detail::check_order(k);
  if (src.rows() == 0 || tgt.rows() == 0) throw EmptySampleError("raw_moment_ipm: empty sample");
  detail::require_dims(src.cols() == tgt.cols(), "raw_moment_ipm: dimension mismatch");
  auto mean_monomials = [&](const DenseMatrix& x) {
    Vector acc;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const Vector v = monomial_vector(x.row(r), k, mode);
      if (acc.empty()) acc.assign(v.size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
    }
    for (auto& a : acc) a /= static_cast<double>(x.rows());
    return acc;
  };
  return norm2(elementwise(ElementOp::sub, mean_monomials(src), mean_monomials(tgt)));
}

// Squared MMD under kappa(x, y) = (1 + xy)^degree. Expanding the kernel
// binomially gives sum_{r=1}^{degree} C(degree, r) (E_1[x^r] - E_2[x^r])^2.
inline double mmd_polynomial_analytic(const AnalyticDistribution& d1, const AnalyticDistribution& d2,
                                      int degree) {
  detail::check_order(degree);
  double s = 0.0;
  for (int r = 1; r <= degree; ++r) {
    const double diff = analytic_raw_moment(d1, r) - analytic_raw_moment(d2, r);
    s += detail::binomial(degree, r) * diff * diff;
  }
  return s;
}

namespace detail {

template <class Kernel>
double mmd_v_statistic(const DenseMatrix& x, const DenseMatrix& y, Kernel&& kernel) {
  auto mean_kernel = [&](const DenseMatrix& a, const DenseMatrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.rows(); ++j) s += kernel(a.row(i), b.row(j));
    return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
  };
  const double v = mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
  return v > 0.0 ? v : 0.0;
}

inline void check_pair(const DenseMatrix& x, const DenseMatrix& y, const char* what) {
  if (x.rows() == 0 || y.rows() == 0) throw EmptySampleError(std::string(what) + ": empty sample");
  require_dims(x.cols() == y.cols(), what);
}

}  // namespace detail

// Biased (V-statistic) squared MMD with kappa = exp(-||x - y||^2 / (2 beta^2)),
// clamped at 0.
inline double mmd_gaussian_estimate(const DenseMatrix& src, const DenseMatrix& tgt, double beta) {
  if (!(beta > 0.0)) throw DomainError("mmd_gaussian_estimate: bandwidth must be > 0");
  detail::check_pair(src, tgt, "mmd_gaussian_estimate");
  const double inv = 1.0 / (2.0 * beta * beta);
  return detail::mmd_v_statistic(src, tgt, [inv](std::span<const double> a, std::span<const double> b) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-d2 * inv);
  });
}

// Biased squared MMD with kappa = (1 + <x, y>)^degree.
inline double mmd_polynomial_estimate(const DenseMatrix& src, const DenseMatrix& tgt, int degree) {
  detail::check_order(degree);
  detail::check_pair(src, tgt, "mmd_polynomial_estimate");
  return detail::mmd_v_statistic(src, tgt, [degree](std::span<const double> a, std::span<const double> b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return ipow(1.0 + dot, degree);
  });
}

// Covariance with divisor |X|.
inline DenseMatrix covariance(const DenseMatrix& x) {
  const Vector mu = sample_mean(x);
  const std::size_t m = x.cols();
  DenseMatrix cov(m, m);
  Vector d(m);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    for (std::size_t i = 0; i < m; ++i) d[i] = row[i] - mu[i];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) cov(i, j) += d[i] * d[j];
  }
  for (auto& v : cov.data()) v /= static_cast<double>(x.rows());
  return cov;
}

// Frobenius norm of the covariance difference (no 1/(4d^2) factor).
inline double coral_distance(const DenseMatrix& src, const DenseMatrix& tgt) {
  detail::check_pair(src, tgt, "coral_distance");
  return norm2(elementwise(ElementOp::sub, covariance(src).data(), covariance(tgt).data()));
}

}  // namespace cmdalign
