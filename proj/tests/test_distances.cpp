#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cmdalign/distances.hpp"

using namespace cmdalign;

namespace {

const AnalyticDistribution kSource = AffineBeta{0.4, 0.4, 0.8, 0.1};
const AnalyticDistribution kLeft = Normal{0.5, 0.27};
const AnalyticDistribution kRight = AffineBeta{0.4, 0.4, 0.8, 0.12};

DenseMatrix column(std::vector<double> v) {
  const std::size_t n = v.size();
  return DenseMatrix(n, 1, std::move(v));
}

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = 0.0, double hi = 1.0) {
  DenseMatrix x(rows, cols);
  for (auto& v : x.data()) v = rng.uniform(lo, hi);
  return x;
}

}  // namespace

TEST(CmdEstimate, IdentityIsZero) {
  Rng rng(1);
  const DenseMatrix x = random_matrix(rng, 20, 3);
  for (auto mode : {MonomialMode::marginal, MonomialMode::full})
    EXPECT_EQ(cmd_estimate(x, x, CmdConfig{5, {}, mode}).value, 0.0);
}

TEST(CmdEstimate, TwoPointHandValue) {
  const auto r = cmd_estimate(column({0, 1}), column({0.25, 0.75}), CmdConfig{5});
  EXPECT_DOUBLE_EQ(r.value, 0.24609375);
  const std::vector<double> terms{0, 0.1875, 0, 0.05859375, 0};
  ASSERT_EQ(r.terms.size(), terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) EXPECT_DOUBLE_EQ(r.terms[i], terms[i]);
}

TEST(CmdEstimate, ShiftOnlyChangesMeanTerm) {
  Rng rng(2);
  const DenseMatrix x = random_matrix(rng, 30, 3);
  DenseMatrix y = x;
  const double delta = 0.125;
  for (auto& v : y.data()) v += delta;
  const auto r = cmd_estimate(x, y, CmdConfig{5});
  EXPECT_NEAR(r.value, delta * std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(r.terms[0], delta * std::sqrt(3.0), 1e-12);
  for (std::size_t j = 1; j < r.terms.size(); ++j) EXPECT_NEAR(r.terms[j], 0.0, 1e-12);
}

TEST(CmdEstimate, ValueIsWeightedSumOfTerms) {
  Rng rng(3);
  const DenseMatrix x = random_matrix(rng, 10, 2), y = random_matrix(rng, 14, 2);
  const auto r = cmd_estimate(x, y, CmdConfig{4, {1.0, 0.5, 0.25, 2.0}});
  const auto unit = cmd_estimate(x, y, CmdConfig{4});
  double sum = 0.0;
  for (double t : r.terms) sum += t;
  EXPECT_DOUBLE_EQ(r.value, sum);
  EXPECT_DOUBLE_EQ(r.terms[1], 0.5 * unit.terms[1]);
  EXPECT_DOUBLE_EQ(r.terms[3], 2.0 * unit.terms[3]);
}

TEST(CmdEstimate, Errors) {
  EXPECT_THROW(cmd_estimate(DenseMatrix(2, 2), DenseMatrix(2, 3)), DimensionError);
  EXPECT_THROW(cmd_estimate(DenseMatrix(0, 2), DenseMatrix(2, 2)), EmptySampleError);
  EXPECT_THROW(cmd_estimate(DenseMatrix(2, 2), DenseMatrix(2, 2), CmdConfig{0}), DomainError);
  EXPECT_THROW(cmd_estimate(DenseMatrix(2, 2), DenseMatrix(2, 2), CmdConfig{2, {1.0, -1.0}}), DomainError);
  EXPECT_THROW(cmd_estimate(DenseMatrix(2, 2), DenseMatrix(2, 2), CmdConfig{2, {1.0}}), DomainError);
}

TEST(CmdEstimate, PseudoMetricLaws) {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng.below(3);
    const DenseMatrix x = random_matrix(rng, 2 + rng.below(20), m);
    const DenseMatrix y = random_matrix(rng, 2 + rng.below(20), m);
    const DenseMatrix z = random_matrix(rng, 2 + rng.below(20), m);
    const CmdConfig cfg{1 + static_cast<int>(rng.below(6)), {}, trial % 2 ? MonomialMode::full : MonomialMode::marginal};
    const double xy = cmd_estimate(x, y, cfg).value, yx = cmd_estimate(y, x, cfg).value;
    EXPECT_EQ(xy, yx);
    EXPECT_EQ(cmd_estimate(x, x, cfg).value, 0.0);
    EXPECT_LE(cmd_estimate(x, z, cfg).value, xy + cmd_estimate(y, z, cfg).value + 1e-10);
  }
}

TEST(CmdEstimate, ConvergesToAnalyticValue) {
  // 1e5 draws per side; 5 standard errors estimated from 20 independent batches.
  const CmdConfig cfg{4};
  const double exact = cmd_analytic(kSource, kLeft, cfg).value;
  Rng rng(77);
  const DenseMatrix a = sample(kSource, 100000, rng), b = sample(kLeft, 100000, rng);
  const double full = cmd_estimate(a, b, cfg).value;
  std::vector<double> batch;
  const std::size_t nb = 20, size = 5000;
  for (std::size_t i = 0; i < nb; ++i) {
    std::vector<std::size_t> idx(size);
    for (std::size_t r = 0; r < size; ++r) idx[r] = i * size + r;
    batch.push_back(cmd_estimate(a.select_rows(idx), b.select_rows(idx), cfg).value);
  }
  double mean = 0.0, var = 0.0;
  for (double v : batch) mean += v / nb;
  for (double v : batch) var += (v - mean) * (v - mean) / (nb - 1);
  const double se_full = std::sqrt(var / nb);
  EXPECT_NEAR(full, exact, 5.0 * se_full);
}

TEST(CmdAnalytic, SourceVsLeftExceedsThreshold) {
  EXPECT_GT(cmd_analytic(kSource, kLeft, CmdConfig{4}).value, 0.0207);
}

TEST(CmdAnalytic, ShiftedCopyOnlyHasMeanTerm) {
  const auto r = cmd_analytic(kSource, kRight, CmdConfig{4});
  EXPECT_NEAR(r.value, 0.02, 1e-9);
  for (std::size_t j = 1; j < r.terms.size(); ++j) EXPECT_EQ(r.terms[j], 0.0);
}

TEST(CmdAnalytic, SelfDistanceIsZero) {
  EXPECT_EQ(cmd_analytic(kLeft, kLeft, CmdConfig{6}).value, 0.0);
  EXPECT_EQ(cmd_analytic(kSource, kSource, CmdConfig{6}).value, 0.0);
}

TEST(RawMomentIpm, ReferenceTripleValues) {
  EXPECT_EQ(raw_moment_ipm(kSource, kLeft, 1), 0.0);
  EXPECT_LT(raw_moment_ipm(kSource, kLeft, 2), 0.016);
  EXPECT_GT(raw_moment_ipm(kSource, kRight, 2), 0.02);
  EXPECT_LT(raw_moment_ipm(kSource, kLeft, 4), 0.02);
  EXPECT_GT(raw_moment_ipm(kSource, kRight, 4), 0.021);
}

TEST(RawMomentIpm, SampleVersionMatchesHand) {
  // E_src[x^2] = 0.5, E_tgt[x^2] = (0.0625 + 0.5625) / 2 = 0.3125.
  EXPECT_DOUBLE_EQ(raw_moment_ipm_estimate(column({0, 1}), column({0.25, 0.75}), 2), 0.1875);
}

TEST(MmdPolynomial, AnalyticSelfIsZero) {
  EXPECT_EQ(mmd_polynomial_analytic(kSource, kSource, 2), 0.0);
  EXPECT_EQ(mmd_polynomial_analytic(kLeft, kLeft, 4), 0.0);
}

TEST(MmdPolynomial, RightTargetValues) {
  EXPECT_GT(mmd_polynomial_analytic(kSource, kRight, 2), 0.0012);
  EXPECT_GT(mmd_polynomial_analytic(kSource, kRight, 4), 0.006);
}

TEST(MmdPolynomial, DegreeTwoEqualsPrintedExpansion) {
  // 2 |dE x|^2 + |dE x^2|^2
  for (const auto& t : {kLeft, kRight}) {
    const double d1 = analytic_raw_moment(kSource, 1) - analytic_raw_moment(t, 1);
    const double d2 = analytic_raw_moment(kSource, 2) - analytic_raw_moment(t, 2);
    EXPECT_NEAR(mmd_polynomial_analytic(kSource, t, 2), 2 * d1 * d1 + d2 * d2, 1e-18);
  }
}

TEST(MmdPolynomial, EstimateMatchesRawMomentExpansion) {
  Rng rng(5);
  const DenseMatrix x = random_matrix(rng, 13, 1), y = random_matrix(rng, 9, 1, -0.5, 1.5);
  for (int degree : {2, 4}) {
    double expect = 0.0, binom = 1.0;
    for (int r = 1; r <= degree; ++r) {
      binom = binom * (degree - r + 1) / r;
      double mx = 0.0, my = 0.0;
      for (double v : x.data()) mx += std::pow(v, r) / 13.0;
      for (double v : y.data()) my += std::pow(v, r) / 9.0;
      expect += binom * (mx - my) * (mx - my);
    }
    EXPECT_NEAR(mmd_polynomial_estimate(x, y, degree), expect, 1e-12);
  }
}

TEST(MeanOverPenalization, OrderingsOnTheReferenceTriple) {
  for (int k : {2, 4}) EXPECT_LT(raw_moment_ipm(kSource, kLeft, k), raw_moment_ipm(kSource, kRight, k));
  for (int d : {2, 4})
    EXPECT_LT(mmd_polynomial_analytic(kSource, kLeft, d), mmd_polynomial_analytic(kSource, kRight, d));
  EXPECT_LT(cmd_analytic(kSource, kRight, CmdConfig{4}).value, cmd_analytic(kSource, kLeft, CmdConfig{4}).value);
}

TEST(MmdGaussian, Examples) {
  Rng rng(6);
  const DenseMatrix x = random_matrix(rng, 10, 2);
  EXPECT_EQ(mmd_gaussian_estimate(x, x, 0.7), 0.0);
  EXPECT_NEAR(mmd_gaussian_estimate(column({0}), column({1}), 1.0), 2.0 - 2.0 * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(mmd_gaussian_estimate(x, random_matrix(rng, 7, 2), 1e8), 0.0, 1e-12);
}

TEST(MmdGaussian, BandwidthMustBePositive) {
  EXPECT_THROW(mmd_gaussian_estimate(column({0}), column({1}), 0.0), DomainError);
  EXPECT_THROW(mmd_gaussian_estimate(column({0}), column({1}), -1.0), DomainError);
}

TEST(Coral, Examples) {
  Rng rng(7);
  const DenseMatrix x = random_matrix(rng, 15, 3);
  EXPECT_EQ(coral_distance(x, x), 0.0);
  DenseMatrix y = x;
  for (auto& v : y.data()) v += 2.5;
  EXPECT_NEAR(coral_distance(x, y), 0.0, 1e-14);
  EXPECT_DOUBLE_EQ(coral_distance(column({0, 2}), column({0, 0})), 1.0);
  EXPECT_THROW(coral_distance(DenseMatrix(2, 2), DenseMatrix(2, 3)), DimensionError);
}

TEST(CmdEstimate, RuntimeGrowsLinearly) {
  Rng rng(8);
  auto time_at = [&](std::size_t n) {
    const DenseMatrix a = random_matrix(rng, n, 20), b = random_matrix(rng, n, 20);
    std::vector<double> t;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      volatile double v = cmd_estimate(a, b, CmdConfig{5}).value;
      (void)v;
      t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(t.begin(), t.begin() + 2, t.end());
    return t[2];
  };
  const double base = time_at(20000), doubled = time_at(40000);
  EXPECT_LE(doubled, 2.5 * base);
}
