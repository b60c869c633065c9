#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "cmdalign/errors.hpp"
#include "cmdalign/numerics.hpp"

namespace cmdalign {

// Full: every degree-k monomial x_1^{r_1}...x_m^{r_m} with sum r = k.
// Marginal: only the pure powers (x_1^k, ..., x_m^k).
enum class MonomialMode { full, marginal };

// Exponent tuples with sum k over m variables, lexicographically descending
// in r_1, so (3,0), (2,1), (1,2), (0,3) for m = 2, k = 3.
inline std::vector<std::vector<int>> monomial_exponents(std::size_t m, int k) {
  std::vector<std::vector<int>> out;
  if (m == 0) return out;
  std::vector<int> cur(m, 0);
  auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
    if (pos + 1 == m) {
      cur[pos] = remaining;
      out.push_back(cur);
      return;
    }
    for (int r = remaining; r >= 0; --r) {
      cur[pos] = r;
      self(self, pos + 1, remaining - r);
    }
  };
  rec(rec, 0, k);
  return out;
}

namespace detail {

inline double monomial(std::span<const double> x, const std::vector<int>& exps) {
  double v = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) v *= ipow(x[i], exps[i]);
  return v;
}

inline void check_order(int k) {
  if (k < 1) throw DomainError("moment order must be >= 1");
}

}  // namespace detail

inline Vector monomial_vector(std::span<const double> x, int k, MonomialMode mode) {
  detail::check_order(k);
  if (mode == MonomialMode::marginal) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = ipow(x[i], k);
    return out;
  }
  const auto exps = monomial_exponents(x.size(), k);
  Vector out;
  out.reserve(exps.size());
  for (const auto& e : exps) out.push_back(detail::monomial(x, e));
  return out;
}

// c_1 = sample mean, c_j = mean monomial vector of the centred rows (j >= 2).
struct CentralMomentVector {
  MonomialMode mode = MonomialMode::marginal;
  std::vector<Vector> terms;  // terms[j - 1] holds c_j

  int order() const noexcept { return static_cast<int>(terms.size()); }
  const Vector& at(int j) const { return terms.at(static_cast<std::size_t>(j - 1)); }
  const Vector& mean() const { return terms.front(); }
};

inline CentralMomentVector central_moments(const DenseMatrix& x, int k, MonomialMode mode) {
  detail::check_order(k);
  if (x.rows() == 0) throw EmptySampleError("central_moments: empty sample");
  const std::size_t m = x.cols();
  const double inv_n = 1.0 / static_cast<double>(x.rows());

  CentralMomentVector out;
  out.mode = mode;
  out.terms.reserve(static_cast<std::size_t>(k));
  out.terms.push_back(sample_mean(x));
  const Vector& mu = out.terms.front();

  if (mode == MonomialMode::marginal) {
    for (int j = 2; j <= k; ++j) out.terms.emplace_back(m, 0.0);
    Vector power(m);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto row = x.row(r);
      for (std::size_t i = 0; i < m; ++i) power[i] = row[i] - mu[i];
      Vector d = power;
      for (int j = 2; j <= k; ++j) {
        auto& acc = out.terms[static_cast<std::size_t>(j - 1)];
        for (std::size_t i = 0; i < m; ++i) {
          power[i] *= d[i];
          acc[i] += power[i];
        }
      }
    }
    for (int j = 2; j <= k; ++j)
      for (auto& v : out.terms[static_cast<std::size_t>(j - 1)]) v *= inv_n;
    return out;
  }

  Vector centred(m);
  for (int j = 2; j <= k; ++j) {
    const auto exps = monomial_exponents(m, j);
    Vector acc(exps.size(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto row = x.row(r);
      for (std::size_t i = 0; i < m; ++i) centred[i] = row[i] - mu[i];
      for (std::size_t e = 0; e < exps.size(); ++e) acc[e] += detail::monomial(centred, exps[e]);
    }
    for (auto& v : acc) v *= inv_n;
    out.terms.push_back(std::move(acc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analytic 1-D distributions with closed-form moments.

// X = scale * Y + shift with Y ~ Beta(alpha, beta).
struct AffineBeta {
  double alpha = 1.0;
  double beta = 1.0;
  double scale = 1.0;
  double shift = 0.0;
};

struct Normal {
  double mean = 0.0;
  double sd = 1.0;
};

using AnalyticDistribution = std::variant<AffineBeta, Normal>;

inline void validate(const AnalyticDistribution& d) {
  if (const auto* b = std::get_if<AffineBeta>(&d)) {
    if (!(b->alpha > 0.0 && b->beta > 0.0))
      throw DomainError("AffineBeta: shape parameters must be > 0");
  } else if (const auto* n = std::get_if<Normal>(&d)) {
    if (!(n->sd > 0.0)) throw DomainError("Normal: sd must be > 0");
  }
}

namespace detail {

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// E[Y^n] for Y ~ Beta(a, b).
inline double beta_raw(double a, double b, int n) {
  double p = 1.0;
  for (int r = 0; r < n; ++r) p *= (a + r) / (a + b + r);
  return p;
}

// E[Z^n] for Z ~ N(0, 1): 0 for odd n, (n-1)!! for even n.
inline double std_normal_raw(int n) {
  if (n % 2 != 0) return 0.0;
  double p = 1.0;
  for (int j = n - 1; j > 1; j -= 2) p *= j;
  return p;
}

}  // namespace detail

inline double analytic_mean(const AnalyticDistribution& d) {
  validate(d);
  if (const auto* b = std::get_if<AffineBeta>(&d)) return b->scale * b->alpha / (b->alpha + b->beta) + b->shift;
  return std::get<Normal>(d).mean;
}

inline double analytic_raw_moment(const AnalyticDistribution& d, int n) {
  validate(d);
  if (n < 0) throw DomainError("analytic_raw_moment: negative order");
  double sum = 0.0;
  if (const auto* b = std::get_if<AffineBeta>(&d)) {
    for (int i = 0; i <= n; ++i)
      sum += detail::binomial(n, i) * ipow(b->scale, i) * ipow(b->shift, n - i) *
             detail::beta_raw(b->alpha, b->beta, i);
    return sum;
  }
  const auto& g = std::get<Normal>(d);
  for (int i = 0; i <= n; ++i)
    sum += detail::binomial(n, i) * ipow(g.mean, n - i) * ipow(g.sd, i) * detail::std_normal_raw(i);
  return sum;
}

// E[(X - E X)^n]. Expanded around the base variable's own mean so that the
// affine shift never enters the arithmetic.
inline double analytic_central_moment(const AnalyticDistribution& d, int n) {
  validate(d);
  if (n < 0) throw DomainError("analytic_central_moment: negative order");
  if (n == 0) return 1.0;
  if (n == 1) return 0.0;
  if (const auto* b = std::get_if<AffineBeta>(&d)) {
    const double mu_y = b->alpha / (b->alpha + b->beta);
    double sum = 0.0;
    for (int i = 0; i <= n; ++i)
      sum += detail::binomial(n, i) * detail::beta_raw(b->alpha, b->beta, i) * ipow(-mu_y, n - i);
    return ipow(b->scale, n) * sum;
  }
  const auto& g = std::get<Normal>(d);
  return ipow(g.sd, n) * detail::std_normal_raw(n);
}

// ---------------------------------------------------------------------------
// Sampling, used for empirical cross-checks against the analytic moments.

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

// I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Inverse CDF of Beta(a, b) by bisection.
inline double beta_quantile(double a, double b, double u) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_incomplete_beta(a, b, mid) < u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double draw(const AnalyticDistribution& d, Rng& rng) {
  if (const auto* b = std::get_if<AffineBeta>(&d))
    return b->scale * beta_quantile(b->alpha, b->beta, rng.uniform()) + b->shift;
  const auto& g = std::get<Normal>(d);
  return rng.normal(g.mean, g.sd);
}

// n draws as a single-column matrix.
inline DenseMatrix sample(const AnalyticDistribution& d, std::size_t n, Rng& rng) {
  validate(d);
  DenseMatrix out(n, 1);
  for (std::size_t i = 0; i < n; ++i) out(i, 0) = draw(d, rng);
  return out;
}

}  // namespace cmdalign
