#pragma once

// Seeded verifier suites behind `cmdalign check`. Each returns a list of
// BoundCheck records; a suite passes iff every record passes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cmdalign/analysis.hpp"
#include "cmdalign/distances.hpp"
#include "cmdalign/moments.hpp"
#include "cmdalign/network.hpp"

namespace cmdalign {

inline bool all_pass(const std::vector<BoundCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
}

// Source Beta(0.4, 0.4) mapped to [0.1, 0.9]; left target N(0.5, 0.27^2);
// right target the source shifted by 0.02.
struct ReferenceTriple {
  AnalyticDistribution source = AffineBeta{0.4, 0.4, 0.8, 0.1};
  AnalyticDistribution left = Normal{0.5, 0.27};
  AnalyticDistribution right = AffineBeta{0.4, 0.4, 0.8, 0.12};
};

// The six reference inequality chains on the triple above. "x < t" is
// recorded as lhs = x, rhs = t; "x > t" as lhs = t, rhs = x.
inline std::vector<BoundCheck> reference_chain_checks(const ReferenceTriple& d = {}) {
  std::vector<BoundCheck> out;
  auto below = [&](std::string name, double x, double t, double tol = 0.0) {
    out.push_back(make_check(std::move(name), x, t, tol));
  };
  auto above = [&](std::string name, double x, double t, double tol = 0.0) {
    out.push_back(make_check(std::move(name), t, x, tol));
  };

  const double p1l = raw_moment_ipm(d.source, d.left, 1), p1r = raw_moment_ipm(d.source, d.right, 1);
  below("d_P1(S,L) == 0", p1l, 0.0);
  below("d_P1(S,L) < 0.02", p1l, 0.02);
  above("d_P1(S,R) >= 0.02", p1r, 0.02, 1e-12);

  below("d_P2(S,L) < 0.016", raw_moment_ipm(d.source, d.left, 2), 0.016);
  above("d_P2(S,R) > 0.02", raw_moment_ipm(d.source, d.right, 2), 0.02);

  below("d_P4(S,L) < 0.02", raw_moment_ipm(d.source, d.left, 4), 0.02);
  above("d_P4(S,R) > 0.021", raw_moment_ipm(d.source, d.right, 4), 0.021);

  below("MMD_k2(S,L) < 0.00025", mmd_polynomial_analytic(d.source, d.left, 2), 0.00025);
  above("MMD_k2(S,R) > 0.0012", mmd_polynomial_analytic(d.source, d.right, 2), 0.0012);

  below("MMD_k4(S,L) < 0.004", mmd_polynomial_analytic(d.source, d.left, 4), 0.004);
  above("MMD_k4(S,R) > 0.006", mmd_polynomial_analytic(d.source, d.right, 4), 0.006);

  const CmdConfig cmd4{4, {}, MonomialMode::marginal};
  above("cmd_4(S,L) > 0.0207", cmd_analytic(d.source, d.left, cmd4).value, 0.0207);
  below("cmd_4(S,R) <= 0.02 + 1e-9", cmd_analytic(d.source, d.right, cmd4).value, 0.02 + 1e-9);
  return out;
}

namespace detail {

inline DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  DenseMatrix x(rows, cols);
  for (auto& v : x.data()) v = rng.uniform(lo, hi);
  return x;
}

// Points on [0, 1]^m: plain uniform, or pushed to the endpoints, where the
// central moment bound is tight.
inline DenseMatrix prop1_sample(Rng& rng, std::size_t rows, std::size_t cols) {
  DenseMatrix x = uniform_matrix(rng, rows, cols, 0.0, 1.0);
  if (rng.below(2) == 0) {
    const double p = rng.uniform();
    for (auto& v : x.data()) v = rng.uniform() < p ? 0.0 : 1.0;
  }
  return x;
}

inline BoundCheck worst_of(std::string name, const std::vector<BoundCheck>& checks) {
  auto it = std::min_element(checks.begin(), checks.end(),
                             [](const BoundCheck& a, const BoundCheck& b) { return a.slack < b.slack; });
  BoundCheck w = *it;
  w.name = std::move(name);
  w.pass = std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
  return w;
}

}  // namespace detail

// Bound values for j = 1, 2 plus, per order j = 1..7, the worst case over
// `cases` random sample pairs on [0, 1]^m.
inline std::vector<BoundCheck> prop_bound_suite(std::uint64_t seed, std::size_t cases) {
  std::vector<BoundCheck> out;
  out.push_back(make_check("prop1_bound(1) == 1", std::fabs(prop1_bound(1) - 1.0), 0.0, 0.0));
  out.push_back(make_check("prop1_bound(2) == 8/27 + 1/4", std::fabs(prop1_bound(2) - (8.0 / 27.0 + 0.25)), 0.0, 0.0));
  // Two-point samples at the ends of the interval attain the j = 1 bound.
  out.push_back(make_check("prop1 two-point tight (j=1)",
                           std::fabs(prop1_check(DenseMatrix(1, 1, 0.0), DenseMatrix(1, 1, 1.0), 0.0, 1.0, 1).lhs - 1.0),
                           0.0, 1e-15));

  Rng rng(seed);
  for (int j = 1; j <= 7; ++j) {
    std::vector<BoundCheck> per;
    per.reserve(cases);
    for (std::size_t i = 0; i < cases; ++i) {
      const std::size_t m = 1 + rng.below(3);
      const DenseMatrix a = detail::prop1_sample(rng, 1 + rng.below(20), m);
      const DenseMatrix b = detail::prop1_sample(rng, 1 + rng.below(20), m);
      per.push_back(prop1_check(a, b, 0.0, 1.0, j));
    }
    if (!per.empty()) out.push_back(detail::worst_of("prop1_j" + std::to_string(j) + " worst", per));
  }
  return out;
}

// One check per case: m = 1, k cycling over {1, 3, 5}, samples drawn on
// [-1/4, 1/4] so that recentring keeps them inside [-1/2, 1/2].
inline std::vector<BoundCheck> char_fct_suite(std::uint64_t seed, std::size_t cases, std::size_t m = 1) {
  std::vector<BoundCheck> out;
  Rng rng(seed);
  const int orders[] = {1, 3, 5};
  for (std::size_t i = 0; i < cases; ++i) {
    const int k = orders[i % 3];
    const DenseMatrix a = detail::uniform_matrix(rng, 5 + rng.below(40), m, -0.25, 0.25);
    const DenseMatrix b = detail::uniform_matrix(rng, 5 + rng.below(40), m, -0.25, 0.25);
    BoundCheck c = thm3_check(a, b, k);
    c.name = "thm3 case " + std::to_string(i) + " k=" + std::to_string(k);
    out.push_back(std::move(c));
  }
  return out;
}

inline constexpr double kGradientTolerance = 1e-5;

// Loss and CMD gradient checks on small random networks (3 inputs, 4 hidden,
// 3 classes, 8 source and 8 target rows), k cycling over {1, 3, 5}.
inline std::vector<BoundCheck> gradient_suite(std::uint64_t seed, std::size_t cases) {
  std::vector<BoundCheck> out;
  const int orders[] = {1, 3, 5};
  for (std::size_t i = 0; i < cases; ++i) {
    Rng rng = Rng(seed).derive(i);
    const int k = orders[i % 3];
    NetworkParams p = NetworkParams::initialize(3, 4, 3, rng.next());
    for (auto blk : p.blocks())
      for (auto& v : blk) v = rng.normal(0.0, 1.0);
    DenseMatrix xs(8, 3), xt(8, 3);
    for (auto& v : xs.data()) v = rng.normal(0.0, 1.0);
    for (auto& v : xt.data()) v = rng.normal(0.5, 1.5);
    std::vector<std::size_t> cls(8);
    for (auto& c : cls) c = rng.below(3);
    const DenseMatrix ys = one_hot(cls, 3);
    const CmdConfig cfg{k, {}, MonomialMode::marginal};
    const std::string tag = " case " + std::to_string(i) + " k=" + std::to_string(k);
    out.push_back(make_check("loss gradient" + tag, loss_gradient_check(p, xs, ys), kGradientTolerance, 0.0));
    out.push_back(make_check("cmd gradient" + tag, cmd_gradient_check(p, xs, xt, cfg), kGradientTolerance, 0.0));
  }
  return out;
}

// Primal/dual agreement: even cases are 1-D (exact), odd cases 2-D (one-sided).
inline std::vector<BoundCheck> dual_form_suite(std::uint64_t seed, std::size_t cases, int k = 5) {
  std::vector<BoundCheck> out;
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const std::size_t m = i % 2 == 0 ? 1 : 2;
    const DenseMatrix a = detail::uniform_matrix(rng, 2 + rng.below(30), m, -1.0, 1.0);
    const DenseMatrix b = detail::uniform_matrix(rng, 2 + rng.below(30), m, -0.5, 1.5);
    BoundCheck c = dual_equivalence_check(a, b, k, rng.next());
    c.name += " case " + std::to_string(i);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace cmdalign
