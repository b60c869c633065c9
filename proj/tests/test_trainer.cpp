#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "cmdalign/analysis.hpp"
#include "cmdalign/trainer.hpp"

using namespace cmdalign;

namespace {

// 90 points per domain so the tests stay fast.
DomainPair small_pair() {
  ArtificialSpec s;
  s.samples = 90;
  return generate_artificial(s);
}

TrainConfig quick(std::size_t epochs = 40) {
  TrainConfig c;
  c.hidden = 6;
  c.epochs = epochs;
  return c;
}

}  // namespace

TEST(Objective, LambdaZeroIsLoss) {
  const auto d = small_pair();
  const auto p = NetworkParams::initialize(2, 6, 3, 1);
  TrainConfig c = quick();
  c.lambda = 0.0;
  const auto o = objective(p, d.source.features, *d.source.labels, d.target.features, c);
  EXPECT_EQ(o.total, o.loss);
  EXPECT_GT(o.cmd, 0.0);
}

TEST(Objective, IdenticalDomainsHaveNoCmdTerm) {
  const auto d = small_pair();
  const auto p = NetworkParams::initialize(2, 6, 3, 1);
  const auto o = objective(p, d.source.features, *d.source.labels, d.source.features, quick());
  EXPECT_EQ(o.cmd, 0.0);
  EXPECT_EQ(o.total, o.loss);
}

TEST(Objective, TotalAtLeastLoss) {
  const auto d = small_pair();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = NetworkParams::initialize(2, 6, 3, s);
    const auto o = objective(p, d.source.features, *d.source.labels, d.target.features, quick());
    EXPECT_GE(o.total, o.loss);
    EXPECT_DOUBLE_EQ(o.total, o.loss + o.cmd);
  }
}

TEST(Evaluate, Examples) {
  const auto y = DenseMatrix::from_rows({{1, 0}, {0, 1}});
  auto e = evaluate(y, y);
  EXPECT_EQ(e.accuracy, 1.0);
  EXPECT_EQ(e.disagreement, 0.0);
  e = evaluate(DenseMatrix(2, 2, 0.5), y);
  EXPECT_DOUBLE_EQ(e.disagreement, 0.5);
  const auto flipped = DenseMatrix::from_rows({{0.2, 0.8}, {0.9, 0.1}});
  EXPECT_EQ(evaluate(flipped, y).accuracy, 0.0);
  EXPECT_THROW(evaluate(DenseMatrix(0, 2), DenseMatrix(0, 2)), EmptySampleError);
}

TEST(Train, LambdaZeroEqualsPlainCrossEntropyTrainer) {
  const auto d = small_pair();
  TrainConfig c = quick(25);
  c.lambda = 0.0;
  const TrainResult r = train(d.source, d.target, c);

  NetworkParams p = NetworkParams::initialize(2, c.hidden, 3, c.seed);
  Optimizer opt(c.optimizer, p);
  for (std::size_t e = 0; e < c.epochs; ++e) opt.step(p, loss_gradients(p, d.source.features, *d.source.labels));
  EXPECT_EQ(r.params, p);
}

TEST(Train, IdenticalSeedsGiveIdenticalHistories) {
  const auto d = small_pair();
  TrainConfig c = quick(30);
  c.batch_size = 32;
  const auto a = train(d.source, d.target, c), b = train(d.source, d.target, c);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.params, b.params);
  c.seed = 2;
  EXPECT_NE(train(d.source, d.target, c).params, a.params);
}

TEST(Train, HistoryIsFiniteAndAccuraciesBounded) {
  const auto d = small_pair();
  const auto r = train(d.source, d.target, quick(60));
  ASSERT_EQ(r.history.size(), 60u);
  EXPECT_FALSE(r.diverged);
  for (const auto& rec : r.history) {
    EXPECT_TRUE(std::isfinite(rec.loss));
    EXPECT_TRUE(std::isfinite(rec.cmd));
    EXPECT_GE(rec.source_accuracy, 0.0);
    EXPECT_LE(rec.source_accuracy, 1.0);
    ASSERT_TRUE(rec.target_accuracy);
    EXPECT_LE(*rec.target_accuracy, 1.0);
  }
  EXPECT_EQ(r.history.front().epoch, 1u);
  EXPECT_EQ(r.history.back().epoch, 60u);
}

TEST(Train, LossDecreases) {
  const auto d = small_pair();
  TrainConfig c = quick(300);
  c.lambda = 0.0;
  const auto r = train(d.source, d.target, c);
  EXPECT_LT(r.history.back().loss, r.history.front().loss);
  EXPECT_GT(r.history.back().source_accuracy, 0.9);
}

TEST(Train, UnlabelledTargetHasNoTargetAccuracy) {
  auto d = small_pair();
  d.target.labels.reset();
  const auto r = train(d.source, d.target, quick(3));
  EXPECT_FALSE(r.history.back().target_accuracy);
}

TEST(Train, TargetLabelsDoNotAffectTraining) {
  auto d = small_pair();
  const auto a = train(d.source, d.target, quick(20));
  d.target.labels.reset();
  EXPECT_EQ(train(d.source, d.target, quick(20)).params, a.params);
}

TEST(Train, MiniBatchesWrapTheShorterSide) {
  auto d = small_pair();
  std::vector<std::size_t> idx(50);
  for (std::size_t i = 0; i < 50; ++i) idx[i] = i * 2;
  d.target = subset(d.target, idx);
  TrainConfig c = quick(5);
  c.batch_size = 16;
  const auto r = train(d.source, d.target, c);
  EXPECT_FALSE(r.diverged);
  EXPECT_EQ(r.history.size(), 5u);
}

TEST(Train, SparseInputsTrain) {
  SparseRowMatrix xs(6), xt(6);
  Rng rng(3);
  std::vector<std::size_t> cls;
  for (int i = 0; i < 40; ++i) {
    const std::size_t c = rng.below(2);
    std::vector<SparseRowMatrix::Entry> row{{c, 1.0}, {2 + rng.below(4), rng.uniform()}};
    xs.push_row(row);
    row[0].index = c;
    row[1].value += 0.3;
    xt.push_row(row);
    cls.push_back(c);
  }
  const Sample s{xs, one_hot(cls, 2), 2}, t{xt, one_hot(cls, 2), 2};
  TrainConfig c = quick(20);
  c.optimizer = OptimizerSettings::adagrad();
  c.batch_size = 16;
  const auto r = train(s, t, c);
  EXPECT_FALSE(r.diverged);
  EXPECT_EQ(r.history.size(), 20u);
}

TEST(Train, DivergenceKeepsLastFiniteParameters) {
  const auto d = small_pair();
  TrainConfig c = quick(10);
  c.lambda = 1e308;
  c.optimizer = OptimizerSettings::sgd(1e308);
  const auto r = train(d.source, d.target, c);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_TRUE(r.params.finite());
  EXPECT_LT(r.history.size(), 10u);
}

TEST(Train, Errors) {
  auto d = small_pair();
  TrainConfig bad = quick();
  bad.hidden = 0;
  EXPECT_THROW(train(d.source, d.target, bad), ConfigError);
  bad = quick();
  bad.lambda = -1.0;
  EXPECT_THROW(train(d.source, d.target, bad), ConfigError);
  bad = quick();
  bad.epochs = 0;
  EXPECT_THROW(train(d.source, d.target, bad), ConfigError);
  Sample unlabelled = d.source;
  unlabelled.labels.reset();
  EXPECT_THROW(train(unlabelled, d.target, quick()), DomainError);
  const Sample wide{DenseMatrix(5, 3), std::nullopt, 0};
  EXPECT_THROW(train(d.source, wide, quick()), DimensionError);
  const Sample empty{DenseMatrix(0, 2), std::nullopt, 0};
  EXPECT_THROW(train(d.source, empty, quick()), EmptySampleError);
}

TEST(WarmStart, FractionOneLeavesMannAtSnapshot) {
  const auto d = small_pair();
  TrainConfig c = quick(30);
  c.warm_start_fraction = 1.0;
  const auto w = warm_start_train(d.source, d.target, c);
  EXPECT_EQ(w.snapshot_epoch, 30u);
  EXPECT_EQ(w.mann.params, w.snapshot);
  EXPECT_TRUE(w.mann.history.empty());
  EXPECT_EQ(w.shallow.params, w.snapshot);
}

TEST(WarmStart, ShallowPhaseEqualsPlainRun) {
  const auto d = small_pair();
  TrainConfig c = quick(30);
  const auto w = warm_start_train(d.source, d.target, c);
  c.lambda = 0.0;
  EXPECT_EQ(w.shallow.params, train(d.source, d.target, c).params);
  EXPECT_EQ(w.snapshot_epoch, 20u);
  ASSERT_EQ(w.mann.history.size(), 10u);
  EXPECT_EQ(w.mann.history.front().epoch, 21u);
}

TEST(WarmStart, Reproducible) {
  const auto d = small_pair();
  const auto a = warm_start_train(d.source, d.target, quick(30));
  const auto b = warm_start_train(d.source, d.target, quick(30));
  EXPECT_EQ(a.mann.params, b.mann.params);
  EXPECT_EQ(a.mann.history, b.mann.history);
}

TEST(WarmStart, ArtificialExperimentImprovesTargetAccuracy) {
  const DomainPair d = generate_artificial({});
  const TrainConfig c;
  const auto w = warm_start_train(d.source, d.target, c);
  const double shallow = evaluate(w.shallow.params, d.target).accuracy;
  const double mann = evaluate(w.mann.params, d.target).accuracy;
  EXPECT_GT(mann, shallow);
  const double snapshot_cmd = cmd_estimate(hidden_activations(w.snapshot, d.source.features),
                                           hidden_activations(w.snapshot, d.target.features), c.cmd)
                                  .value;
  EXPECT_LT(w.mann.history.back().cmd, snapshot_cmd);
  EXPECT_LT(alignment_report(w.mann.params, d.source.features, d.target.features).significant,
            alignment_report(w.shallow.params, d.source.features, d.target.features).significant);
}

TEST(MetricsCsv, FixedColumns) {
  std::vector<EpochRecord> h{{1, 0.5, 0.25, 1.0, 0.75}, {2, 0.125, 0.0625, 0.5, std::nullopt}};
  std::ostringstream out;
  write_metrics_csv(h, out);
  EXPECT_EQ(out.str(), "epoch,loss,cmd,source_acc,target_acc\n1,0.5,0.25,1,0.75\n2,0.125,0.0625,0.5,\n");
}
