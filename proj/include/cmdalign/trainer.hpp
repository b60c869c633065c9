#pragma once

// Joint minimisation of the source cross-entropy plus lambda times the CMD
// between source and target hidden activations. Each step computes both
// samples' activations, the analytic gradients, and one optimizer update.
// Training stops after a fixed epoch budget.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cmdalign/datasets.hpp"
#include "cmdalign/distances.hpp"
#include "cmdalign/network.hpp"
#include "cmdalign/optim.hpp"

namespace cmdalign {

struct TrainConfig {
  std::size_t hidden = 15;
  CmdConfig cmd{};
  double lambda = 1.0;
  OptimizerSettings optimizer = OptimizerSettings::adadelta();
  std::size_t epochs = 3000;
  std::size_t batch_size = 0;  // 0 = full batch
  double warm_start_fraction = 2.0 / 3.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(warm_start_fraction >= 0.0 && warm_start_fraction <= 1.0))
      throw ConfigError("warm_start_fraction must be in [0, 1]");
    try {
      cmd.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    optimizer.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double cmd = 0.0;
  double source_accuracy = 0.0;
  std::optional<double> target_accuracy;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct Objective {
  double total = 0.0;
  double loss = 0.0;
  double cmd = 0.0;
};

inline Objective objective(const NetworkParams& p, const Features& xs, const DenseMatrix& ys,
                           const Features& xt, const TrainConfig& cfg) {
  const ForwardTrace ts = forward(p, xs);
  const DenseMatrix ht = hidden_activations(p, xt);
  Objective o;
  o.loss = cross_entropy_loss(ts, ys);
  o.cmd = cmd_estimate(ts.hidden, ht, cfg.cmd).value;
  o.total = o.loss + cfg.lambda * o.cmd;
  return o;
}

struct Evaluation {
  double accuracy = 0.0;
  // Mean over rows of sum_i |h_i - y_i| / 2.
  double disagreement = 0.0;
};

inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline Evaluation evaluate(const DenseMatrix& outputs, const DenseMatrix& labels) {
  if (outputs.rows() == 0) throw EmptySampleError("evaluate: empty sample");
  detail::require_dims(outputs.rows() == labels.rows() && outputs.cols() == labels.cols(),
                       "evaluate: output/label shape mismatch");
  Evaluation e;
  for (std::size_t r = 0; r < outputs.rows(); ++r) {
    const auto h = outputs.row(r);
    const auto y = labels.row(r);
    if (argmax(h) == argmax(y)) e.accuracy += 1.0;
    double d = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) d += std::fabs(h[i] - y[i]);
    e.disagreement += 0.5 * d;
  }
  e.accuracy /= static_cast<double>(outputs.rows());
  e.disagreement /= static_cast<double>(outputs.rows());
  return e;
}

inline Evaluation evaluate(const NetworkParams& p, const Sample& s) {
  if (!s.labels) throw DomainError("evaluate: sample has no labels");
  return evaluate(forward(p, s.features).output, *s.labels);
}

// Mutable state of one training loop. Copying it snapshots the run,
// including the optimizer accumulators and the batch-shuffling stream.
class TrainingRun {
 public:
  // `target` labels, when present, are only read for the per-epoch target
  // accuracy; gradients never see them.
  TrainingRun(const Sample& source, const Sample& target, const TrainConfig& cfg)
      : source_(&source),
        target_(&target),
        cfg_(cfg),
        params_(init(source, target, cfg)),
        optimizer_(cfg.optimizer, params_),
        rng_(Rng(cfg.seed).derive(2)) {}

  const NetworkParams& params() const noexcept { return params_; }
  const std::vector<EpochRecord>& history() const noexcept { return history_; }
  const Optimizer& optimizer() const noexcept { return optimizer_; }
  std::size_t epochs_done() const noexcept { return epoch_; }
  bool diverged() const noexcept { return diverged_; }
  const std::string& failure() const noexcept { return failure_; }

  // Runs `epochs` more epochs with adaptation weight `lambda`. Stops early and
  // keeps the last finite parameters if the loss or an update goes non-finite.
  void run(std::size_t epochs, double lambda) {
    for (std::size_t e = 0; e < epochs && !diverged_; ++e) {
      NetworkParams stable = params_;
      try {
        run_epoch(lambda);
        ++epoch_;
        EpochRecord rec = record();
        if (!std::isfinite(rec.loss) || !std::isfinite(rec.cmd) || !params_.finite())
          throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch_));
        history_.push_back(rec);
      } catch (const NonFiniteError& err) {
        params_ = std::move(stable);
        diverged_ = true;
        failure_ = err.what();
      }
    }
  }

  EpochRecord record() const {
    const ForwardTrace ts = forward(params_, source_->features);
    const DenseMatrix ht = hidden_activations(params_, target_->features);
    EpochRecord r;
    r.epoch = epoch_;
    r.loss = cross_entropy_loss(ts, *source_->labels);
    r.cmd = cmd_estimate(ts.hidden, ht, cfg_.cmd).value;
    r.source_accuracy = evaluate(ts.output, *source_->labels).accuracy;
    if (target_->labels) r.target_accuracy = evaluate(params_, *target_).accuracy;
    return r;
  }

 private:
  static NetworkParams init(const Sample& source, const Sample& target, const TrainConfig& cfg) {
    cfg.validate();
    if (source.rows() == 0 || target.rows() == 0) throw EmptySampleError("train: empty sample");
    if (!source.labels) throw DomainError("train: source sample needs labels");
    detail::require_dims(source.dim() == target.dim(), "train: source/target dimension mismatch");
    return NetworkParams::initialize(source.dim(), cfg.hidden, source.classes, cfg.seed);
  }

  Gradients step_gradients(const Features& xs, const DenseMatrix& ys, const Features& xt, double lambda) const {
    Gradients g = loss_gradients(params_, xs, ys);
    if (lambda != 0.0) g.add_scaled(cmd_gradients(params_, xs, xt, cfg_.cmd), lambda);
    return g;
  }

  void run_epoch(double lambda) {
    const std::size_t ns = source_->rows(), nt = target_->rows();
    if (cfg_.batch_size == 0 || (cfg_.batch_size >= ns && cfg_.batch_size >= nt)) {
      optimizer_.step(params_, step_gradients(source_->features, *source_->labels, target_->features, lambda));
      return;
    }
    // Equal-size source and target batches; the shorter side wraps around.
    const std::size_t b = cfg_.batch_size;
    std::vector<std::size_t> src_order(ns), tgt_order(nt);
    for (std::size_t i = 0; i < ns; ++i) src_order[i] = i;
    for (std::size_t i = 0; i < nt; ++i) tgt_order[i] = i;
    rng_.shuffle(src_order);
    rng_.shuffle(tgt_order);
    const std::size_t steps = (std::max(ns, nt) + b - 1) / b;
    std::vector<std::size_t> sb(b), tb(b);
    for (std::size_t s = 0; s < steps; ++s) {
      for (std::size_t i = 0; i < b; ++i) {
        sb[i] = src_order[(s * b + i) % ns];
        tb[i] = tgt_order[(s * b + i) % nt];
      }
      const Sample src_batch = subset(*source_, sb);
      const Features tgt_batch = select_rows(target_->features, tb);
      optimizer_.step(params_, step_gradients(src_batch.features, *src_batch.labels, tgt_batch, lambda));
    }
  }

  const Sample* source_;
  const Sample* target_;
  TrainConfig cfg_;
  NetworkParams params_;
  Optimizer optimizer_;
  Rng rng_;
  std::vector<EpochRecord> history_;
  std::size_t epoch_ = 0;
  bool diverged_ = false;
  std::string failure_;
};

struct TrainResult {
  NetworkParams params;
  std::vector<EpochRecord> history;
  bool diverged = false;
  std::string failure;
};

inline TrainResult to_result(const TrainingRun& run) {
  return {run.params(), run.history(), run.diverged(), run.failure()};
}

inline TrainResult train(const Sample& source, const Sample& target, const TrainConfig& cfg) {
  TrainingRun run(source, target, cfg);
  run.run(cfg.epochs, cfg.lambda);
  return to_result(run);
}

struct WarmStartResult {
  TrainResult shallow;
  NetworkParams snapshot;  // shallow parameters at the warm-start fraction
  std::size_t snapshot_epoch = 0;
  TrainResult mann;        // history continues the epoch count from the snapshot
};

// Trains the plain network (lambda = 0) for the full budget, snapshots it at
// `warm_start_fraction` of the budget, then continues from that snapshot with
// the CMD term for the remaining epochs.
inline WarmStartResult warm_start_train(const Sample& source, const Sample& target, const TrainConfig& cfg) {
  TrainingRun run(source, target, cfg);
  const auto snap_epoch = static_cast<std::size_t>(
      std::llround(cfg.warm_start_fraction * static_cast<double>(cfg.epochs)));
  run.run(snap_epoch, 0.0);
  TrainingRun mann = run;

  WarmStartResult out;
  out.snapshot = run.params();
  out.snapshot_epoch = run.epochs_done();
  run.run(cfg.epochs - snap_epoch, 0.0);
  out.shallow = to_result(run);

  const std::size_t before = mann.history().size();
  mann.run(cfg.epochs - snap_epoch, cfg.lambda);
  out.mann = to_result(mann);
  out.mann.history.erase(out.mann.history.begin(),
                         out.mann.history.begin() + static_cast<std::ptrdiff_t>(before));
  return out;
}

inline void write_metrics_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  out << "epoch,loss,cmd,source_acc,target_acc\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << detail::format_double(r.loss) << ',' << detail::format_double(r.cmd) << ','
        << detail::format_double(r.source_accuracy) << ',';
    if (r.target_accuracy) out << detail::format_double(*r.target_accuracy);
    out << '\n';
  }
}

}  // namespace cmdalign
