#pragma once

// Statistical verifiers: two-sample Kolmogorov-Smirnov alignment report,
// the upper central moment bound, the characteristic function bound, the
// primal/dual equivalence of the CMD, and the moment-count sensitivity sweep.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cmdalign/datasets.hpp"
#include "cmdalign/distances.hpp"
#include "cmdalign/moments.hpp"
#include "cmdalign/network.hpp"
#include "cmdalign/trainer.hpp"

namespace cmdalign {

inline constexpr double kKsSignificance = 1e-2;

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

// Q_KS(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2). The series is
// cut once a term drops below 1e-10; if it has not converged after 100 terms
// (small lambda) the probability is 1.
inline double kolmogorov_q(double lambda) {
  constexpr double kTermEps = 1e-10;
  const double a2 = -2.0 * lambda * lambda;
  double sum = 0.0, sign = 2.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = sign * std::exp(a2 * j * j);
    sum += term;
    if (std::fabs(term) < kTermEps) return std::clamp(sum, 0.0, 1.0);
    sign = -sign;
  }
  return 1.0;
}

inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptySampleError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());

  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }

  KsResult r;
  r.statistic = d;
  const double ne = std::sqrt(na * nb / (na + nb));
  r.p_value = d == 0.0 ? 1.0 : kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
  r.significant = r.p_value < kKsSignificance;
  return r;
}

struct AlignmentReport {
  std::vector<KsResult> nodes;
  std::size_t significant = 0;
};

// KS test per hidden unit between source and target activations.
inline AlignmentReport alignment_report(const NetworkParams& p, const Features& xs, const Features& xt) {
  const DenseMatrix hs = hidden_activations(p, xs);
  const DenseMatrix ht = hidden_activations(p, xt);
  AlignmentReport out;
  std::vector<double> cs(hs.rows()), ct(ht.rows());
  for (std::size_t j = 0; j < p.hidden(); ++j) {
    for (std::size_t r = 0; r < hs.rows(); ++r) cs[r] = hs(r, j);
    for (std::size_t r = 0; r < ht.rows(); ++r) ct[r] = ht(r, j);
    out.nodes.push_back(ks_two_sample(cs, ct));
    if (out.nodes.back().significant) ++out.significant;
  }
  return out;
}

// ---------------------------------------------------------------------------

// pass <=> rhs - lhs >= -tolerance
struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline BoundCheck make_check(std::string name, double lhs, double rhs, double tolerance) {
  BoundCheck c{std::move(name), lhs, rhs, rhs - lhs, tolerance, false};
  c.pass = c.slack >= -tolerance;
  return c;
}

// 2 (1/(j+1) (j/(j+1))^j + 2^{-(1+j)})
inline double prop1_bound(int j) {
  if (j < 1) throw DomainError("prop1_bound: order must be >= 1");
  const double jd = j;
  return 2.0 * (1.0 / (jd + 1.0) * std::pow(jd / (jd + 1.0), jd) + std::ldexp(1.0, -(1 + j)));
}

// ||c_j(a) - c_j(b)||_2 / |hi - lo|^j against the bound, scaled by sqrt(m)
// for m marginal coordinates.
inline BoundCheck prop1_check(const DenseMatrix& a, const DenseMatrix& b, double lo, double hi, int j,
                              double tolerance = 1e-12) {
  if (!(hi > lo)) throw DomainError("prop1_check: need lo < hi");
  for (const DenseMatrix* s : {&a, &b})
    for (double v : s->data())
      if (v < lo || v > hi) throw DomainError("prop1_check: sample outside [lo, hi]");
  CmdConfig cfg{j, {}, MonomialMode::marginal};
  const auto ma = central_moments(a, j, cfg.mode);
  const auto mb = central_moments(b, j, cfg.mode);
  detail::require_dims(ma.at(j).size() == mb.at(j).size(), "prop1_check: dimension mismatch");
  const double lhs = norm2(elementwise(ElementOp::sub, ma.at(j), mb.at(j))) / std::pow(hi - lo, j);
  const double rhs = std::sqrt(static_cast<double>(a.cols())) * prop1_bound(j);
  return make_check("prop1_j" + std::to_string(j), lhs, rhs, tolerance);
}

// Empirical characteristic function mean_x exp(i <t, x>).
inline std::complex<double> empirical_cf(const DenseMatrix& x, std::span<const double> t) {
  double re = 0.0, im = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double arg = x.row_dot(r, t);
    re += std::cos(arg);
    im += std::sin(arg);
  }
  const double inv = 1.0 / static_cast<double>(x.rows());
  return {re * inv, im * inv};
}

namespace detail {

inline DenseMatrix recentred(const DenseMatrix& x) {
  DenseMatrix out = x;
  const Vector mu = sample_mean(x);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) -= mu[j];
  return out;
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace detail

// Characteristic function bound for odd k on recentred samples in
// [-1/2, 1/2]^m, m in {1, 2}:
//   max_{||t||_1 <= 1} |cf_a(t) - cf_b(t)| <= sqrt(m) e cmd_k(a, b) + tau,
//   tau = 1/(k+1)! max_{|alpha| = k+1} (|c_alpha(a)| + |c_alpha(b)|),
// with full monomials and unit weights. The left side is a maximum over a
// grid: 201 points on [-1, 1] for m = 1, a 101 x 101 grid clipped to the
// l1 ball for m = 2.
inline BoundCheck thm3_check(const DenseMatrix& a_in, const DenseMatrix& b_in, int k, double tolerance = 1e-9) {
  if (k < 1 || k % 2 == 0) throw DomainError("thm3_check: k must be odd");
  if (a_in.cols() != b_in.cols()) throw DimensionError("thm3_check: dimension mismatch");
  const std::size_t m = a_in.cols();
  if (m < 1 || m > 2) throw DomainError("thm3_check: only m in {1, 2} is supported");
  if (a_in.rows() == 0 || b_in.rows() == 0) throw EmptySampleError("thm3_check: empty sample");
  const DenseMatrix a = detail::recentred(a_in), b = detail::recentred(b_in);
  for (const DenseMatrix* s : {&a, &b})
    for (double v : s->data())
      if (std::fabs(v) > 0.5) throw DomainError("thm3_check: recentred sample leaves [-1/2, 1/2]^m");

  double lhs = 0.0;
  Vector t(m);
  if (m == 1) {
    for (int i = 0; i <= 200; ++i) {
      t[0] = -1.0 + i / 100.0;
      lhs = std::max(lhs, std::abs(empirical_cf(a, t) - empirical_cf(b, t)));
    }
  } else {
    for (int i = 0; i <= 100; ++i) {
      for (int j = 0; j <= 100; ++j) {
        t[0] = -1.0 + i / 50.0;
        t[1] = -1.0 + j / 50.0;
        if (std::fabs(t[0]) + std::fabs(t[1]) > 1.0) continue;
        lhs = std::max(lhs, std::abs(empirical_cf(a, t) - empirical_cf(b, t)));
      }
    }
  }

  const CmdConfig cfg{k, {}, MonomialMode::full};
  const double cmd = cmd_estimate(a, b, cfg).value;
  double tau = 0.0;
  for (const auto& alpha : monomial_exponents(m, k + 1)) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) sa += detail::monomial(a.row(r), alpha);
    for (std::size_t r = 0; r < b.rows(); ++r) sb += detail::monomial(b.row(r), alpha);
    tau = std::max(tau, std::fabs(sa / a.rows()) + std::fabs(sb / b.rows()));
  }
  tau /= detail::factorial(k + 1);
  const double rhs = std::sqrt(static_cast<double>(m)) * std::numbers::e * cmd + tau;
  return make_check("thm3_k" + std::to_string(k), lhs, rhs, tolerance);
}

// Primal (supremum over unit-norm polynomial coefficients) against dual
// (norm of the moment difference) for every order j <= k. The primal side
// evaluates polynomials on the raw rows without going through
// central_moments. In 1-D the supremum is attained at w = +-1 and the check
// is two-sided equality; for m > 1 random unit directions must never exceed
// the dual value (one-sided).
inline BoundCheck dual_equivalence_check(const DenseMatrix& a, const DenseMatrix& b, int k, std::uint64_t seed = 1,
                                         std::size_t directions = 1000) {
  detail::check_order(k);
  if (a.rows() == 0 || b.rows() == 0) throw EmptySampleError("dual_equivalence_check: empty sample");
  detail::require_dims(a.cols() == b.cols(), "dual_equivalence_check: dimension mismatch");
  const std::size_t m = a.cols();
  const auto dual = cmd_estimate(a, b, CmdConfig{k, {}, MonomialMode::full}).terms;

  // E_X[<w, nu_j(x - shift_X)>] with shift = mean for j >= 2, 0 for j = 1.
  auto expectation = [](const DenseMatrix& x, int j, std::span<const double> w) {
    Vector shift(x.cols(), 0.0);
    if (j >= 2) {
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) shift[c] += x(r, c);
      for (auto& s : shift) s /= static_cast<double>(x.rows());
    }
    const auto exps = monomial_exponents(x.cols(), j);
    Vector d(x.cols());
    double acc = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) d[c] = x(r, c) - shift[c];
      for (std::size_t e = 0; e < exps.size(); ++e) acc += w[e] * detail::monomial(d, exps[e]);
    }
    return acc / static_cast<double>(x.rows());
  };

  double worst = 0.0;
  if (m == 1) {
    const Vector plus{1.0}, minus{-1.0};
    for (int j = 1; j <= k; ++j) {
      const double primal = std::max(std::fabs(expectation(a, j, plus) - expectation(b, j, plus)),
                                     std::fabs(expectation(a, j, minus) - expectation(b, j, minus)));
      worst = std::max(worst, std::fabs(primal - dual[static_cast<std::size_t>(j - 1)]));
    }
    return make_check("dual_form_1d", worst, 0.0, 1e-12);
  }

  Rng rng(seed);
  worst = -INFINITY;
  for (int j = 1; j <= k; ++j) {
    const std::size_t len = monomial_exponents(m, j).size();
    Vector w(len);
    for (std::size_t s = 0; s < directions; ++s) {
      for (auto& v : w) v = rng.normal();
      const double nrm = norm2(w);
      for (auto& v : w) v /= nrm;
      const double primal = std::fabs(expectation(a, j, w) - expectation(b, j, w));
      worst = std::max(worst, primal - dual[static_cast<std::size_t>(j - 1)]);
    }
  }
  return make_check("dual_form_sampled", worst, 0.0, 1e-10);
}

// ---------------------------------------------------------------------------
// Sensitivity of target accuracy to the number of moments k.

enum class SweepProtocol { train, warm_start };

struct SweepCell {
  int k = 0;
  double lambda = 0.0;
  double accuracy = 0.0;
  bool diverged = false;
};

struct SweepRatio {
  int k = 0;
  std::vector<double> lambdas;
  double accuracy = 0.0;  // mean over the converged lambda cells
  double ratio = 0.0;     // accuracy / accuracy at the reference k
  std::size_t diverged = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // (k, lambda) order
  std::vector<SweepRatio> ratios;
};

// Trains one model per (k, lambda) cell on (source, target) and reports each
// k's lambda-averaged target accuracy relative to the reference k. Cells run
// on worker threads; results are written to fixed slots, so the output does
// not depend on scheduling.
inline SweepResult sensitivity_sweep(const Sample& source, const Sample& target, const TrainConfig& base,
                                     const std::vector<int>& ks, const std::vector<double>& lambdas,
                                     int reference_k = 5, SweepProtocol protocol = SweepProtocol::train,
                                     unsigned workers = 0) {
  if (ks.empty() || lambdas.empty()) throw ConfigError("sweep: empty grid");
  if (std::find(ks.begin(), ks.end(), reference_k) == ks.end())
    throw ConfigError("sweep: reference k is not in the grid");
  if (!target.labels) throw ConfigError("sweep: target labels are needed to score accuracy");

  SweepResult out;
  for (int k : ks)
    for (double l : lambdas) out.cells.push_back({k, l, 0.0, false});

  auto run_cell = [&](SweepCell& cell) {
    TrainConfig cfg = base;
    cfg.cmd.k = cell.k;
    cfg.cmd.weights.clear();
    cfg.lambda = cell.lambda;
    TrainResult r;
    if (protocol == SweepProtocol::warm_start)
      r = warm_start_train(source, target, cfg).mann;
    else
      r = train(source, target, cfg);
    cell.diverged = r.diverged;
    cell.accuracy = r.diverged ? NAN : evaluate(r.params, target).accuracy;
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(out.cells.size()));
  if (workers <= 1) {
    for (auto& c : out.cells) run_cell(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < out.cells.size(); i += workers) run_cell(out.cells[i]);
      });
    for (auto& t : pool) t.join();
  }

  for (int k : ks) {
    SweepRatio r{k, lambdas, 0.0, 0.0, 0};
    std::size_t ok = 0;
    for (const auto& c : out.cells) {
      if (c.k != k) continue;
      if (c.diverged) {
        ++r.diverged;
      } else {
        r.accuracy += c.accuracy;
        ++ok;
      }
    }
    r.accuracy = ok ? r.accuracy / static_cast<double>(ok) : NAN;
    out.ratios.push_back(r);
  }
  double ref = NAN;
  for (const auto& r : out.ratios)
    if (r.k == reference_k) ref = r.accuracy;
  for (auto& r : out.ratios) r.ratio = r.accuracy / ref;
  return out;
}

}  // namespace cmdalign
