#pragma once

// JSON documents: parameter snapshots, artificial specs, run and sweep
// configs, and the reports printed by the command-line tool. Config readers
// reject unknown keys.

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cmdalign/analysis.hpp"
#include "cmdalign/datasets.hpp"
#include "cmdalign/distances.hpp"
#include "cmdalign/errors.hpp"
#include "cmdalign/network.hpp"
#include "cmdalign/optim.hpp"
#include "cmdalign/trainer.hpp"

namespace cmdalign {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown(const Json& j, std::span<const std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError((where.empty() ? std::string("config") : where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  reject_unknown(j, std::span<const std::string_view>(allowed.begin(), allowed.size()), where);
}

// Reads j[key] into out when present; type errors name the key.
template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where = {}) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

template <class T>
void read_unsigned(const Json& j, const char* key, T& out, const std::string& where = {}) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_unsigned()) throw ConfigError("config key '" + where + key + "' must be a non-negative integer");
  out = it->template get<T>();
}

inline Json parse_json_text(std::istream& in, const std::string& what) {
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what + ": malformed JSON: " + e.what());
  }
}

inline Json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return parse_json_text(in, path);
}

inline Json matrix_json(const DenseMatrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(Json(std::vector<double>(m.row(r).begin(), m.row(r).end())));
  return rows;
}

inline DenseMatrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const char* name) {
  if (!j.is_array() || j.size() != rows) throw DimensionError(std::string("params: '") + name + "' has the wrong row count");
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw DimensionError(std::string("params: '") + name + "' has the wrong column count");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const Json& j, std::size_t size, const char* name) {
  if (!j.is_array() || j.size() != size) throw DimensionError(std::string("params: '") + name + "' has the wrong length");
  return j.get<Vector>();
}

inline std::string_view to_string(MonomialMode m) { return m == MonomialMode::full ? "full" : "marginal"; }

inline MonomialMode mode_from_string(std::string_view s) {
  if (s == "full") return MonomialMode::full;
  if (s == "marginal") return MonomialMode::marginal;
  throw ConfigError("unknown monomial mode '" + std::string(s) + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parameter snapshots. Doubles are written as the shortest decimal that reads
// back to the same bits.

inline Json to_json(const NetworkParams& p) {
  Json j;
  j["shapes"] = {{"input", p.input_dim()}, {"hidden", p.hidden()}, {"classes", p.classes()}};
  j["W"] = detail::matrix_json(p.W);
  j["b"] = p.b;
  j["V"] = detail::matrix_json(p.V);
  j["c"] = p.c;
  j["seed"] = p.seed;
  return j;
}

inline NetworkParams params_from_json(const Json& j) {
  try {
    detail::reject_unknown(j, {"shapes", "W", "b", "V", "c", "seed"}, "");
    const Json& s = j.at("shapes");
    detail::reject_unknown(s, {"input", "hidden", "classes"}, "shapes.");
    const auto in = s.at("input").get<std::size_t>();
    const auto hid = s.at("hidden").get<std::size_t>();
    const auto cls = s.at("classes").get<std::size_t>();
    NetworkParams p;
    p.W = detail::matrix_from_json(j.at("W"), hid, in, "W");
    p.b = detail::vector_from_json(j.at("b"), hid, "b");
    p.V = detail::matrix_from_json(j.at("V"), cls, hid, "V");
    p.c = detail::vector_from_json(j.at("c"), cls, "c");
    p.seed = j.value("seed", std::uint64_t{0});
    if (!p.finite()) throw NonFiniteError("params: non-finite entry");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
}

inline NetworkParams load_params(const std::string& path) { return params_from_json(detail::load_json(path)); }

// ---------------------------------------------------------------------------

inline Json to_json(const ArtificialSpec& s) {
  Json j;
  j["samples"] = s.samples;
  j["classes"] = s.classes;
  j["rotation_deg"] = s.rotation_deg;
  j["shift"] = s.shift;
  j["centers"] = s.centers;
  j["spread"] = s.spread;
  j["seed"] = s.seed;
  j["target_seed"] = s.effective_target_seed();
  return j;
}

inline ArtificialSpec artificial_from_json(const Json& j, const std::string& where = "artificial.") {
  detail::reject_unknown(j, {"samples", "classes", "rotation_deg", "shift", "centers", "spread", "seed", "target_seed"},
                         where);
  ArtificialSpec s;
  detail::read_unsigned(j, "samples", s.samples, where);
  detail::read_unsigned(j, "classes", s.classes, where);
  detail::read(j, "rotation_deg", s.rotation_deg, where);
  detail::read(j, "shift", s.shift, where);
  detail::read(j, "centers", s.centers, where);
  detail::read(j, "spread", s.spread, where);
  detail::read_unsigned(j, "seed", s.seed, where);
  if (j.contains("target_seed")) {
    std::uint64_t t = 0;
    detail::read_unsigned(j, "target_seed", t, where);
    s.target_seed = t;
  }
  // Class count without explicit centers: keep the first `classes` defaults.
  if (!j.contains("centers") && s.classes < s.centers.size()) s.centers.resize(s.classes);
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Run configuration: training hyper-parameters plus where the data comes
// from. Without `source`/`target` paths the artificial generator is used.

struct RunConfig {
  std::optional<std::string> source;
  std::optional<std::string> target;
  ArtificialSpec artificial;
  std::string output_dir = "run";
  TrainConfig train;

  bool uses_files() const { return source.has_value(); }
};

inline constexpr std::array<std::string_view, 14> kRunKeys = {
    "source", "target", "artificial", "output_dir", "hidden", "k", "weights", "lambda", "mode",
    "optimizer", "epochs", "batch_size", "warm_start_fraction", "seed"};

namespace detail {

inline OptimizerSettings optimizer_from_json(const Json& j) {
  reject_unknown(j, {"kind", "learning_rate", "rho", "epsilon"}, "optimizer.");
  std::string kind = "adadelta";
  read(j, "kind", kind, "optimizer.");
  OptimizerSettings o;
  switch (optimizer_kind_from_string(kind)) {
    case OptimizerKind::sgd: o = OptimizerSettings::sgd(0.01); break;
    case OptimizerKind::adagrad: o = OptimizerSettings::adagrad(); break;
    case OptimizerKind::adadelta: o = OptimizerSettings::adadelta(); break;
  }
  read(j, "learning_rate", o.learning_rate, "optimizer.");
  read(j, "rho", o.rho, "optimizer.");
  read(j, "epsilon", o.epsilon, "optimizer.");
  return o;
}

// Fills a RunConfig from the keys it knows; the caller has already rejected
// keys outside its own allowed set.
inline RunConfig run_fields_from_json(const Json& j) {
  RunConfig rc;
  TrainConfig& t = rc.train;
  if (j.contains("source")) rc.source = j["source"].is_string() ? j["source"].get<std::string>() : throw ConfigError("config key 'source' must be a string");
  if (j.contains("target")) rc.target = j["target"].is_string() ? j["target"].get<std::string>() : throw ConfigError("config key 'target' must be a string");
  if (rc.source.has_value() != rc.target.has_value())
    throw ConfigError("config needs both 'source' and 'target' or neither");
  if (j.contains("artificial")) {
    if (rc.source) throw ConfigError("config key 'artificial' conflicts with 'source'/'target'");
    rc.artificial = artificial_from_json(j["artificial"]);
  }
  read(j, "output_dir", rc.output_dir);
  read_unsigned(j, "hidden", t.hidden);
  read(j, "k", t.cmd.k);
  read(j, "weights", t.cmd.weights);
  read(j, "lambda", t.lambda);
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m);
    t.cmd.mode = mode_from_string(m);
  }
  if (j.contains("optimizer")) t.optimizer = optimizer_from_json(j["optimizer"]);
  read_unsigned(j, "epochs", t.epochs);
  read_unsigned(j, "batch_size", t.batch_size);
  read(j, "warm_start_fraction", t.warm_start_fraction);
  read_unsigned(j, "seed", t.seed);
  if (t.cmd.mode == MonomialMode::full) throw ConfigError("training supports mode 'marginal' only");
  t.validate();
  return rc;
}

}  // namespace detail

inline RunConfig run_config_from_json(const Json& j) {
  detail::reject_unknown(j, kRunKeys, "");
  return detail::run_fields_from_json(j);
}

inline RunConfig load_run_config(const std::string& path) { return run_config_from_json(detail::load_json(path)); }

inline Json to_json(const OptimizerSettings& o) {
  return {{"kind", to_string(o.kind)}, {"learning_rate", o.learning_rate}, {"rho", o.rho}, {"epsilon", o.epsilon}};
}

inline Json to_json(const RunConfig& rc) {
  Json j;
  if (rc.source) {
    j["source"] = *rc.source;
    j["target"] = *rc.target;
  } else {
    j["artificial"] = to_json(rc.artificial);
  }
  const TrainConfig& t = rc.train;
  j["output_dir"] = rc.output_dir;
  j["hidden"] = t.hidden;
  j["k"] = t.cmd.k;
  if (!t.cmd.weights.empty()) j["weights"] = t.cmd.weights;
  j["lambda"] = t.lambda;
  j["mode"] = detail::to_string(t.cmd.mode);
  j["optimizer"] = to_json(t.optimizer);
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["warm_start_fraction"] = t.warm_start_fraction;
  j["seed"] = t.seed;
  return j;
}

inline DomainPair load_domains(const RunConfig& rc) {
  if (!rc.uses_files()) return generate_artificial(rc.artificial);
  DomainPair d{load_sample(*rc.source), load_sample(*rc.target)};
  if (!d.source.labels) throw ConfigError("source file '" + *rc.source + "' has no labels");
  if (d.source.dim() != d.target.dim()) throw DimensionError("source and target dimensions differ");
  // Class counts are inferred per file; align them so that one-hot widths agree.
  if (d.target.labels && d.target.classes != d.source.classes) {
    const std::size_t classes = std::max(d.source.classes, d.target.classes);
    for (Sample* s : {&d.source, &d.target}) {
      std::vector<std::size_t> cls(s->rows());
      for (std::size_t r = 0; r < s->rows(); ++r) cls[r] = s->class_of(r);
      s->labels = one_hot(cls, classes);
      s->classes = classes;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------

struct SweepConfig {
  RunConfig run;
  std::vector<int> ks{1, 2, 3, 4, 5, 6, 7};
  std::vector<double> lambdas{0.3, 1.0, 3.0};
  int reference_k = 5;
  SweepProtocol protocol = SweepProtocol::warm_start;
  unsigned workers = 0;
};

inline SweepConfig sweep_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  Json run = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "k_values" || key == "lambda_values" || key == "reference_k" || key == "protocol" || key == "workers")
      continue;
    run[key] = value;
  }
  SweepConfig sc;
  sc.run = run_config_from_json(run);
  detail::read(j, "k_values", sc.ks);
  detail::read(j, "lambda_values", sc.lambdas);
  detail::read(j, "reference_k", sc.reference_k);
  detail::read_unsigned(j, "workers", sc.workers);
  if (j.contains("protocol")) {
    std::string p;
    detail::read(j, "protocol", p);
    if (p == "train") sc.protocol = SweepProtocol::train;
    else if (p == "warm_start") sc.protocol = SweepProtocol::warm_start;
    else throw ConfigError("unknown sweep protocol '" + p + "'");
  }
  if (sc.ks.empty() || sc.lambdas.empty()) throw ConfigError("sweep: empty grid");
  for (int k : sc.ks)
    if (k < 1) throw ConfigError("sweep: k values must be >= 1");
  for (double l : sc.lambdas)
    if (!(l >= 0.0)) throw ConfigError("sweep: lambda values must be >= 0");
  return sc;
}

inline SweepConfig load_sweep_config(const std::string& path) { return sweep_config_from_json(detail::load_json(path)); }

// One row per k: k, the lambda grid joined by ';', mean target accuracy over
// the converged lambda cells, ratio to the reference k, diverged cell count.
inline void write_sweep_csv(const SweepResult& r, std::ostream& out) {
  out << "k,lambdas,accuracy,ratio,diverged\n";
  for (const auto& row : r.ratios) {
    out << row.k << ',';
    for (std::size_t i = 0; i < row.lambdas.size(); ++i) out << (i ? ";" : "") << detail::format_double(row.lambdas[i]);
    out << ',' << detail::format_double(row.accuracy) << ',' << detail::format_double(row.ratio) << ','
        << row.diverged << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reports.

inline Json to_json(const DistanceReport& r) {
  Json j{{"metric", r.metric}, {"value", r.value}};
  if (!r.terms.empty()) j["terms"] = r.terms;
  return j;
}

inline Json to_json(const BoundCheck& c) {
  return {{"name", c.name}, {"lhs", c.lhs},       {"rhs", c.rhs},
          {"slack", c.slack}, {"tolerance", c.tolerance}, {"pass", c.pass}};
}

inline Json to_json(const std::vector<BoundCheck>& checks) {
  Json j = Json::array();
  for (const auto& c : checks) j.push_back(to_json(c));
  return j;
}

inline Json to_json(const EpochRecord& r) {
  Json j{{"epoch", r.epoch}, {"loss", r.loss}, {"cmd", r.cmd}, {"source_accuracy", r.source_accuracy}};
  j["target_accuracy"] = r.target_accuracy ? Json(*r.target_accuracy) : Json(nullptr);
  return j;
}

inline Json to_json(const AlignmentReport& a) {
  Json nodes = Json::array();
  for (const auto& n : a.nodes) nodes.push_back({{"statistic", n.statistic}, {"p_value", n.p_value}, {"significant", n.significant}});
  return {{"significant", a.significant}, {"nodes", nodes}};
}

// Final state of one training run. `final` is null when no epoch finished.
inline Json run_summary_json(const TrainResult& r, const AlignmentReport& align) {
  Json j;
  j["epochs_run"] = r.history.size();
  j["diverged"] = r.diverged;
  j["failure"] = r.diverged ? Json(r.failure) : Json(nullptr);
  j["final"] = r.history.empty() ? Json(nullptr) : to_json(r.history.back());
  j["alignment"] = to_json(align);
  return j;
}

inline void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace cmdalign
