#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cmdalign/network.hpp"

using namespace cmdalign;

namespace {

NetworkParams random_params(std::size_t in, std::size_t hid, std::size_t cls, std::uint64_t seed, double sd = 1.0) {
  NetworkParams p = NetworkParams::zeros(in, hid, cls);
  Rng rng(seed);
  for (auto blk : p.blocks())
    for (auto& v : blk) v = rng.normal(0.0, sd);
  return p;
}

DenseMatrix gaussian_data(std::size_t rows, std::size_t cols, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  Rng rng(seed);
  DenseMatrix x(rows, cols);
  for (auto& v : x.data()) v = rng.normal(mean, sd);
  return x;
}

DenseMatrix random_labels(std::size_t rows, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> cls(rows);
  for (auto& c : cls) c = rng.below(classes);
  DenseMatrix y(rows, classes);
  for (std::size_t r = 0; r < rows; ++r) y(r, cls[r]) = 1.0;
  return y;
}

double max_abs(const Gradients& g) {
  double m = 0.0;
  for (auto blk : g.blocks())
    for (double v : blk) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace

TEST(Forward, ZeroParamsGiveHalfAndUniform) {
  const auto p = NetworkParams::zeros(3, 4, 5);
  const auto t = forward(p, gaussian_data(6, 3, 1));
  for (double v : t.hidden.data()) EXPECT_EQ(v, 0.5);
  for (double v : t.output.data()) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Forward, SingleInputSingleHidden) {
  NetworkParams p = NetworkParams::zeros(1, 1, 2);
  p.W(0, 0) = 1.0;
  const auto t = forward(p, DenseMatrix(1, 1, 0.0));
  EXPECT_EQ(t.hidden(0, 0), 0.5);
}

TEST(Forward, RowsSumToOneAndHiddenInsideUnitInterval) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = random_params(4, 6, 3, s, 3.0);
    const auto t = forward(p, gaussian_data(10, 4, s + 100, 0.0, 5.0));
    for (std::size_t r = 0; r < t.output.rows(); ++r) {
      double sum = 0.0;
      for (double v : t.output.row(r)) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
    for (double v : t.hidden.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Forward, DimensionMismatchThrows) {
  EXPECT_THROW(forward(NetworkParams::zeros(3, 2, 2), DenseMatrix(1, 4)), DimensionError);
}

TEST(Forward, SparseMatchesDense) {
  const auto p = random_params(5, 3, 2, 4);
  SparseRowMatrix s(5);
  const std::vector<SparseRowMatrix::Entry> r0{{0, 1.0}, {3, -2.0}}, r1{{4, 0.5}};
  s.push_row(r0);
  s.push_row(r1);
  const auto a = forward(p, s), b = forward(p, s.to_dense());
  EXPECT_EQ(a.hidden, b.hidden);
  EXPECT_EQ(a.output, b.output);
}

TEST(Initialize, GlorotRangeAndZeroBiases) {
  const auto p = NetworkParams::initialize(10, 15, 3, 42);
  const double l0 = std::sqrt(6.0 / 25.0), l1 = std::sqrt(6.0 / 18.0);
  for (double w : p.W.data()) EXPECT_LE(std::fabs(w), l0);
  for (double v : p.V.data()) EXPECT_LE(std::fabs(v), l1);
  for (double b : p.b) EXPECT_EQ(b, 0.0);
  for (double c : p.c) EXPECT_EQ(c, 0.0);
  EXPECT_EQ(p, NetworkParams::initialize(10, 15, 3, 42));
}

TEST(CrossEntropy, Examples) {
  DenseMatrix uniform(2, 3, 1.0 / 3.0);
  EXPECT_NEAR(cross_entropy_loss(uniform, DenseMatrix::from_rows({{1, 0, 0}, {0, 0, 1}})), std::log(3.0), 1e-15);
  const auto y = DenseMatrix::from_rows({{0, 1}, {1, 0}});
  EXPECT_EQ(cross_entropy_loss(y, y), 0.0);
  EXPECT_NEAR(cross_entropy_loss(DenseMatrix::from_rows({{0.5, 0.5}}), DenseMatrix::from_rows({{1, 0}})),
              0.693147, 1e-6);
}

TEST(CrossEntropy, LogIsClamped) {
  EXPECT_NEAR(cross_entropy_loss(DenseMatrix::from_rows({{0.0, 1.0}}), DenseMatrix::from_rows({{1, 0}})),
              -std::log(1e-12), 1e-12);
}

TEST(CrossEntropy, ShapeMismatchThrows) {
  EXPECT_THROW(cross_entropy_loss(DenseMatrix(2, 2), DenseMatrix(3, 2)), DimensionError);
}

TEST(LossGradients, ZeroParamsOneSample) {
  const auto g = loss_gradients(NetworkParams::zeros(2, 3, 2), DenseMatrix(1, 2, 0.7),
                                DenseMatrix::from_rows({{1, 0}}));
  EXPECT_DOUBLE_EQ(g.dc[0], -0.5);
  EXPECT_DOUBLE_EQ(g.dc[1], 0.5);
}

TEST(LossGradients, ZeroWhenOutputsMatchLabels) {
  // With V = c = 0 the output is uniform; a label equal to it zeroes the error.
  NetworkParams p = random_params(3, 4, 2, 8);
  for (auto& v : p.V.data()) v = 0.0;
  for (auto& v : p.c) v = 0.0;
  const auto g = loss_gradients(p, gaussian_data(5, 3, 9), DenseMatrix(5, 2, 0.5));
  EXPECT_EQ(max_abs(g), 0.0);
}

TEST(LossGradients, MatchFiniteDifferences) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = random_params(3, 4, 3, s);
    EXPECT_LT(loss_gradient_check(p, gaussian_data(8, 3, s + 50), random_labels(8, 3, s + 70)), 1e-5) << "seed " << s;
  }
}

TEST(LossGradients, VGradientUsesHiddenActivations) {
  // dV = E[(h - y) h0^T]; a version using the output h in place of h0 would not
  // even have the right shape unless classes == hidden.
  const auto p = random_params(2, 3, 3, 12);
  const auto x = gaussian_data(4, 2, 13);
  const auto y = random_labels(4, 3, 14);
  const auto t = forward(p, x);
  const auto g = loss_gradients(p, x, y);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double expect = 0.0;
      for (std::size_t n = 0; n < 4; ++n) expect += (t.output(n, i) - y(n, i)) * t.hidden(n, j) / 4.0;
      EXPECT_NEAR(g.dV(i, j), expect, 1e-15);
    }
}

TEST(CmdGradients, IdenticalSamplesGiveZero) {
  const auto p = random_params(3, 4, 2, 3);
  const auto x = gaussian_data(8, 3, 4);
  EXPECT_EQ(max_abs(cmd_gradients(p, x, x, CmdConfig{3})), 0.0);
}

TEST(CmdGradients, MatchFiniteDifferences) {
  const int orders[] = {1, 3, 5};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = random_params(3, 4, 2, s);
    const auto xs = gaussian_data(8, 3, s + 200), xt = gaussian_data(8, 3, s + 300, 0.5, 1.5);
    const CmdConfig cfg{orders[s % 3]};
    EXPECT_LT(cmd_gradient_check(p, xs, xt, cfg), 1e-5) << "seed " << s << " k " << cfg.k;
  }
}

TEST(CmdGradients, WeightedOrdersMatchFiniteDifferences) {
  const auto p = random_params(3, 4, 2, 31);
  const auto xs = gaussian_data(9, 3, 32), xt = gaussian_data(6, 3, 33, 0.3, 0.8);
  EXPECT_LT(cmd_gradient_check(p, xs, xt, CmdConfig{4, {0.5, 2.0, 0.0, 1.5}}), 1e-5);
}

TEST(CmdGradients, OrderOneIsTheMeanMatchingTerm) {
  // db = (1/N) sum_n u . h0(1 - h0) over source rows minus the same over target
  // rows, u = (E h0(Xs) - E h0(Xt)) / ||.||.
  const auto p = random_params(3, 4, 2, 5);
  const auto xs = gaussian_data(8, 3, 6), xt = gaussian_data(8, 3, 7, 1.0);
  const auto hs = hidden_activations(p, xs), ht = hidden_activations(p, xt);
  const Vector diff = elementwise(ElementOp::sub, sample_mean(hs), sample_mean(ht));
  const double nrm = norm2(diff);
  const auto g = cmd_gradients(p, xs, xt, CmdConfig{1});
  for (std::size_t j = 0; j < 4; ++j) {
    double expect = 0.0;
    for (std::size_t n = 0; n < 8; ++n) {
      expect += diff[j] / nrm * hs(n, j) * (1 - hs(n, j)) / 8.0;
      expect -= diff[j] / nrm * ht(n, j) * (1 - ht(n, j)) / 8.0;
    }
    EXPECT_NEAR(g.db[j], expect, 1e-14);
  }
  for (double v : g.dV.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.dc) EXPECT_EQ(v, 0.0);
}

TEST(CmdGradients, InvariantUnderSwappingDomains) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = random_params(3, 5, 2, s);
    const auto xs = gaussian_data(7, 3, s + 10), xt = gaussian_data(11, 3, s + 20, 0.4);
    const CmdConfig cfg{5};
    const auto a = cmd_gradients(p, xs, xt, cfg), b = cmd_gradients(p, xt, xs, cfg);
    const auto ab = a.blocks(), bb = b.blocks();
    for (std::size_t k = 0; k < ab.size(); ++k)
      for (std::size_t i = 0; i < ab[k].size(); ++i) EXPECT_NEAR(ab[k][i], bb[k][i], 1e-10);
  }
}

TEST(CmdGradients, SparseMatchesDense) {
  const auto p = random_params(4, 3, 2, 40);
  SparseRowMatrix s(4), t(4);
  const std::vector<SparseRowMatrix::Entry> a{{0, 1.0}, {2, 0.5}}, b{{1, -1.0}}, c{{3, 2.0}}, d{{0, -0.5}, {3, 1.0}};
  s.push_row(a);
  s.push_row(b);
  t.push_row(c);
  t.push_row(d);
  const auto gs = cmd_gradients(p, s, t, CmdConfig{3});
  const auto gd = cmd_gradients(p, s.to_dense(), t.to_dense(), CmdConfig{3});
  for (std::size_t i = 0; i < gs.db.size(); ++i) EXPECT_NEAR(gs.db[i], gd.db[i], 1e-15);
  for (std::size_t i = 0; i < gs.dW.data().size(); ++i) EXPECT_NEAR(gs.dW.data()[i], gd.dW.data()[i], 1e-15);
}

TEST(CmdGradients, FullModeIsRejected) {
  const auto p = random_params(2, 2, 2, 1);
  const auto x = gaussian_data(3, 2, 2);
  EXPECT_THROW(cmd_gradients(p, x, x, CmdConfig{3, {}, MonomialMode::full}), DomainError);
}

TEST(FiniteDifference, ZeroGradientInstance) {
  // A constant objective with a zero analytic gradient has error 0.
  const auto p = random_params(2, 2, 2, 1);
  EXPECT_EQ(finite_difference_error(p, Gradients::zeros_like(p), [](const NetworkParams&) { return 1.0; }, 1e-5), 0.0);
  EXPECT_THROW(finite_difference_error(p, Gradients::zeros_like(p), [](const NetworkParams&) { return 1.0; }, 0.0),
               DomainError);
}

TEST(FiniteDifference, DetectsAWrongGradient) {
  const auto p = random_params(3, 4, 3, 2);
  const auto x = gaussian_data(8, 3, 3);
  const auto y = random_labels(8, 3, 4);
  Gradients g = loss_gradients(p, x, y);
  g.db[0] += 0.1;
  const double err = finite_difference_error(
      p, g, [&](const NetworkParams& q) { return cross_entropy_loss(forward(q, x), y); }, 1e-5);
  EXPECT_GT(err, 1e-3);
}
