// cmdalign: data generation, distances, training, verifiers and sweeps.
//
// Exit codes: 0 success, 1 verifier failure, 2 usage or config error,
// 3 numerical divergence.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmdalign/analysis.hpp"
#include "cmdalign/datasets.hpp"
#include "cmdalign/distances.hpp"
#include "cmdalign/io.hpp"
#include "cmdalign/trainer.hpp"
#include "cmdalign/verify.hpp"

namespace fs = std::filesystem;
using namespace cmdalign;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifier = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

struct UsageError : Error {
  using Error::Error;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create directory '" + dir + "'");
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

void write_params(const NetworkParams& p, const fs::path& path) { write_json_file(to_json(p), path.string()); }

void write_metrics(const std::vector<EpochRecord>& h, const fs::path& path) {
  auto out = open_output(path);
  write_metrics_csv(h, out);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct GenOptions {
  std::string out;
  std::size_t samples = ArtificialSpec{}.samples;
  double rotation = ArtificialSpec{}.rotation_deg;
  std::vector<double> shift;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> target_seed;
};

int run_gen(const GenOptions& o) {
  ArtificialSpec spec;
  spec.samples = o.samples;
  spec.rotation_deg = o.rotation;
  if (!o.shift.empty()) {
    if (o.shift.size() != 2) throw UsageError("--shift expects X,Y");
    spec.shift = {o.shift[0], o.shift[1]};
  }
  spec.seed = o.seed;
  spec.target_seed = o.target_seed;
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const DomainPair d = generate_artificial(spec);
  ensure_dir(o.out);
  {
    auto f = open_output(fs::path(o.out) / "source.csv");
    write_dense_csv(d.source, f);
  }
  {
    auto f = open_output(fs::path(o.out) / "target.csv");
    write_dense_csv(d.target, f);
  }
  write_json_file(to_json(spec), (fs::path(o.out) / "spec.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DistanceOptions {
  std::string metric, source, target, mode = "marginal";
  std::optional<int> k, degree;
  std::optional<double> beta;
};

int run_distance(const DistanceOptions& o) {
  const DenseMatrix src = to_dense(load_sample(o.source).features);
  const DenseMatrix tgt = to_dense(load_sample(o.target).features);
  const MonomialMode mode = detail::mode_from_string(o.mode);
  DistanceReport r;
  if (o.metric == "cmd") {
    r = cmd_estimate(src, tgt, CmdConfig{o.k.value_or(5), {}, mode});
  } else if (o.metric == "raw-ipm") {
    if (!o.k) throw UsageError("metric raw-ipm requires --k");
    r = {"raw-ipm", raw_moment_ipm_estimate(src, tgt, *o.k, mode), {}};
  } else if (o.metric == "mmd-gauss") {
    if (!o.beta) throw UsageError("metric mmd-gauss requires --beta");
    r = {"mmd-gauss", mmd_gaussian_estimate(src, tgt, *o.beta), {}};
  } else if (o.metric == "mmd-poly") {
    if (!o.degree) throw UsageError("metric mmd-poly requires --degree");
    r = {"mmd-poly", mmd_polynomial_estimate(src, tgt, *o.degree), {}};
  } else if (o.metric == "coral") {
    r = {"coral", coral_distance(src, tgt), {}};
  } else {
    throw UsageError("unknown metric '" + o.metric + "'");
  }
  std::cout << to_json(r).dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_train(const std::string& config, std::optional<double> lambda) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig rc = load_run_config(config);
  if (lambda) {
    rc.train.lambda = *lambda;
    rc.train.validate();
  }
  const DomainPair d = load_domains(rc);
  const TrainResult r = train(d.source, d.target, rc.train);

  ensure_dir(rc.output_dir);
  const fs::path dir(rc.output_dir);
  write_metrics(r.history, dir / "metrics.csv");
  write_params(r.params, dir / "params.json");
  Json report;
  report["config"] = to_json(rc);
  report["seed"] = rc.train.seed;
  report["result"] = run_summary_json(r, alignment_report(r.params, d.source.features, d.target.features));
  report["wall_time_s"] = seconds_since(t0);
  write_json_file(report, (dir / "report.json").string());
  if (r.diverged) {
    std::cerr << "diverged: " << r.failure << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

int run_warm_start(const std::string& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig rc = load_run_config(config);
  const DomainPair d = load_domains(rc);
  const WarmStartResult w = warm_start_train(d.source, d.target, rc.train);

  const fs::path dir(rc.output_dir);
  ensure_dir((dir / "shallow").string());
  ensure_dir((dir / "mann").string());
  write_metrics(w.shallow.history, dir / "shallow" / "metrics.csv");
  write_params(w.shallow.params, dir / "shallow" / "params.json");
  write_metrics(w.mann.history, dir / "mann" / "metrics.csv");
  write_params(w.mann.params, dir / "mann" / "params.json");
  write_params(w.snapshot, dir / "snapshot.json");

  Json report;
  report["config"] = to_json(rc);
  report["seed"] = rc.train.seed;
  report["snapshot_epoch"] = w.snapshot_epoch;
  report["shallow"] = run_summary_json(w.shallow, alignment_report(w.shallow.params, d.source.features, d.target.features));
  report["mann"] = run_summary_json(w.mann, alignment_report(w.mann.params, d.source.features, d.target.features));
  report["wall_time_s"] = seconds_since(t0);
  write_json_file(report, (dir / "report.json").string());
  if (w.shallow.diverged || w.mann.diverged) {
    std::cerr << "diverged: " << (w.shallow.diverged ? w.shallow.failure : w.mann.failure) << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_check(const std::string& suite, std::uint64_t seed, std::optional<std::size_t> cases) {
  std::vector<BoundCheck> checks;
  if (suite == "appendix-a") checks = reference_chain_checks();
  else if (suite == "prop-bound") checks = prop_bound_suite(seed, cases.value_or(10000));
  else if (suite == "char-fct") checks = char_fct_suite(seed, cases.value_or(50));
  else if (suite == "gradients") checks = gradient_suite(seed, cases.value_or(20));
  else if (suite == "dual-form") checks = dual_form_suite(seed, cases.value_or(20));
  else throw UsageError("unknown check suite '" + suite + "'");
  std::cout << to_json(checks).dump(2) << '\n';
  return all_pass(checks) ? kExitOk : kExitVerifier;
}

int run_report_alignment(const std::string& params, const std::string& source, const std::string& target) {
  const NetworkParams p = load_params(params);
  const Sample s = load_sample(source), t = load_sample(target);
  if (s.dim() != p.input_dim() || t.dim() != p.input_dim())
    throw DimensionError("params expect " + std::to_string(p.input_dim()) + " input features");
  const AlignmentReport a = alignment_report(p, s.features, t.features);
  std::cout << "node,statistic,p_value,significant\n";
  for (std::size_t i = 0; i < a.nodes.size(); ++i)
    std::cout << i << ',' << detail::format_double(a.nodes[i].statistic) << ','
              << detail::format_double(a.nodes[i].p_value) << ',' << (a.nodes[i].significant ? 1 : 0) << '\n';
  std::cerr << "significant " << a.significant << " of " << a.nodes.size() << '\n';
  return kExitOk;
}

int run_sweep(const std::string& config) {
  const SweepConfig sc = load_sweep_config(config);
  const DomainPair d = load_domains(sc.run);
  const SweepResult r =
      sensitivity_sweep(d.source, d.target, sc.run.train, sc.ks, sc.lambdas, sc.reference_k, sc.protocol, sc.workers);
  write_sweep_csv(r, std::cout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Central moment discrepancy: distances, moment-alignment training and verifiers"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-artificial", "Write source.csv, target.csv and spec.json");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--samples", gen.samples, "Rows per domain");
  gen_cmd->add_option("--rotation-deg", gen.rotation, "Target rotation about its centroid");
  gen_cmd->add_option("--shift", gen.shift, "Target translation X,Y")->delimiter(',')->expected(2);
  gen_cmd->add_option("--seed", gen.seed, "Source seed");
  gen_cmd->add_option("--target-seed", gen.target_seed, "Target seed (default: derived from --seed)");

  DistanceOptions dist;
  auto* dist_cmd = app.add_subcommand("distance", "Print a distance report as JSON");
  dist_cmd->add_option("--metric", dist.metric, "cmd | mmd-gauss | mmd-poly | coral | raw-ipm")
      ->required()
      ->check(CLI::IsMember({"cmd", "mmd-gauss", "mmd-poly", "coral", "raw-ipm"}));
  dist_cmd->add_option("--source", dist.source)->required();
  dist_cmd->add_option("--target", dist.target)->required();
  dist_cmd->add_option("--k", dist.k, "Moment order");
  dist_cmd->add_option("--beta", dist.beta, "Gaussian kernel bandwidth");
  dist_cmd->add_option("--degree", dist.degree, "Polynomial kernel degree");
  dist_cmd->add_option("--mode", dist.mode, "marginal | full")->check(CLI::IsMember({"marginal", "full"}));

  std::string train_config;
  std::optional<double> train_lambda;
  auto* train_cmd = app.add_subcommand("train", "Train one network; writes metrics.csv, report.json, params.json");
  train_cmd->add_option("--config", train_config)->required();
  train_cmd->add_option("--lambda", train_lambda, "Override the adaptation weight");

  std::string warm_config;
  auto* warm_cmd = app.add_subcommand("warm-start", "Shallow run, snapshot, then continue with the CMD term");
  warm_cmd->add_option("--config", warm_config)->required();

  std::string suite;
  std::uint64_t check_seed = 1;
  std::optional<std::size_t> check_cases;
  auto* check_cmd = app.add_subcommand("check", "Run a verifier suite; prints BoundCheck JSON");
  check_cmd->add_option("suite", suite)
      ->required()
      ->check(CLI::IsMember({"appendix-a", "prop-bound", "char-fct", "gradients", "dual-form"}));
  check_cmd->add_option("--seed", check_seed);
  check_cmd->add_option("--cases", check_cases);

  std::string al_params, al_source, al_target;
  auto* align_cmd = app.add_subcommand("report-alignment", "Per-hidden-node KS table");
  align_cmd->add_option("--params", al_params)->required();
  align_cmd->add_option("--source", al_source)->required();
  align_cmd->add_option("--target", al_target)->required();

  std::string sweep_config;
  auto* sweep_cmd = app.add_subcommand("sweep", "Moment-count sensitivity sweep; prints ratio CSV");
  sweep_cmd->add_option("--config", sweep_config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*dist_cmd) return run_distance(dist);
    if (*train_cmd) return run_train(train_config, train_lambda);
    if (*warm_cmd) return run_warm_start(warm_config);
    if (*check_cmd) return run_check(suite, check_seed, check_cases);
    if (*align_cmd) return run_report_alignment(al_params, al_source, al_target);
    if (*sweep_cmd) return run_sweep(sweep_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
