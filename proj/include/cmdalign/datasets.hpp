#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cmdalign/errors.hpp"
#include "cmdalign/numerics.hpp"

namespace cmdalign {

// Features with optional one-hot labels.
struct Sample {
  Features features;
  std::optional<DenseMatrix> labels;
  std::size_t classes = 0;

  std::size_t rows() const { return rows_of(features); }
  std::size_t dim() const { return cols_of(features); }
  bool labeled() const { return labels.has_value(); }
  bool sparse() const { return std::holds_alternative<SparseRowMatrix>(features); }

  void validate() const {
    if (!labels) return;
    detail::require_dims(labels->rows() == rows() && labels->cols() == classes,
                         "Sample: label rows/classes mismatch");
    for (std::size_t r = 0; r < labels->rows(); ++r) {
      int ones = 0;
      for (double v : labels->row(r)) {
        if (v == 1.0) ++ones;
        else if (v != 0.0) throw DomainError("Sample: labels are not one-hot");
      }
      if (ones != 1) throw DomainError("Sample: labels are not one-hot");
    }
  }

  // Class index of row r (labels required).
  std::size_t class_of(std::size_t r) const {
    const auto row = labels->row(r);
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
};

inline DenseMatrix one_hot(const std::vector<std::size_t>& classes_per_row, std::size_t classes) {
  DenseMatrix y(classes_per_row.size(), classes);
  for (std::size_t r = 0; r < classes_per_row.size(); ++r) {
    if (classes_per_row[r] >= classes) throw DomainError("one_hot: class index out of range");
    y(r, classes_per_row[r]) = 1.0;
  }
  return y;
}

inline Sample subset(const Sample& s, std::span<const std::size_t> idx) {
  Sample out{select_rows(s.features, idx), std::nullopt, s.classes};
  if (s.labels) out.labels = s.labels->select_rows(idx);
  return out;
}

// ---------------------------------------------------------------------------
// Artificial two-domain data: Gaussian class blobs; the target is an
// independent draw, rotated about its centroid and translated.

struct ArtificialSpec {
  std::size_t samples = 639;
  std::size_t classes = 3;
  double rotation_deg = 5.0;
  std::array<double, 2> shift{1.0, 0.5};
  std::vector<std::array<double, 2>> centers{{0.0, 0.0}, {2.5, 0.0}, {1.25, 2.2}};
  double spread = 0.3;
  std::uint64_t seed = 1;
  // Seed of the target draw. Unset means a stream derived from `seed`.
  std::optional<std::uint64_t> target_seed;

  void validate() const {
    if (classes == 0) throw DomainError("ArtificialSpec: classes must be >= 1");
    if (samples < classes) throw DomainError("ArtificialSpec: samples must be >= classes");
    if (centers.size() != classes) throw DomainError("ArtificialSpec: need one center per class");
    if (!(spread >= 0.0) || !std::isfinite(spread)) throw DomainError("ArtificialSpec: spread must be >= 0");
    if (!std::isfinite(rotation_deg) || !std::isfinite(shift[0]) || !std::isfinite(shift[1]))
      throw DomainError("ArtificialSpec: non-finite transform");
  }

  std::uint64_t effective_target_seed() const {
    return target_seed ? *target_seed : Rng(seed).derive(1).next();
  }
};

namespace detail {

inline Sample draw_blobs(const ArtificialSpec& spec, Rng rng) {
  DenseMatrix x(spec.samples, 2);
  std::vector<std::size_t> cls(spec.samples);
  std::size_t r = 0;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const std::size_t count = spec.samples / spec.classes + (c < spec.samples % spec.classes ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i, ++r) {
      x(r, 0) = rng.normal(spec.centers[c][0], spec.spread);
      x(r, 1) = rng.normal(spec.centers[c][1], spec.spread);
      cls[r] = c;
    }
  }
  return Sample{std::move(x), one_hot(cls, spec.classes), spec.classes};
}

}  // namespace detail

struct DomainPair {
  Sample source;
  Sample target;  // labels kept for evaluation only
};

inline DomainPair generate_artificial(const ArtificialSpec& spec) {
  spec.validate();
  DomainPair out{detail::draw_blobs(spec, Rng(spec.seed)),
                 detail::draw_blobs(spec, Rng(spec.effective_target_seed()))};
  auto& x = std::get<DenseMatrix>(out.target.features);
  if (spec.rotation_deg != 0.0) {
    const Vector centroid = sample_mean(x);
    const double a = spec.rotation_deg * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double dx = x(r, 0) - centroid[0], dy = x(r, 1) - centroid[1];
      x(r, 0) = centroid[0] + ca * dx - sa * dy;
      x(r, 1) = centroid[1] + sa * dx + ca * dy;
    }
  }
  if (spec.shift[0] != 0.0 || spec.shift[1] != 0.0) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
      x(r, 0) += spec.shift[0];
      x(r, 1) += spec.shift[1];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text formats.

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> parse_index(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

inline std::size_t classes_from(const std::vector<std::size_t>& cls) {
  return cls.empty() ? 0 : *std::max_element(cls.begin(), cls.end()) + 1;
}

}  // namespace detail

// Dense CSV: optional header "label,f1,...,fm" or "f1,...,fm"; integer class
// column when labelled. A file without a header is read as unlabelled.
inline Sample parse_dense_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  bool has_label = false;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<std::size_t> cls;
  std::size_t rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = detail::split_on(trimmed, ',');

    if (first) {
      first = false;
      const bool numeric = std::all_of(cells.begin(), cells.end(),
                                       [](std::string_view c) { return detail::parse_double(c).has_value(); });
      if (!numeric) {
        std::size_t offset = 0;
        if (cells[0] == "label") {
          has_label = true;
          offset = 1;
        }
        if (cells.size() == offset) throw ParseError(line_no, "unknown header (no feature columns)");
        for (std::size_t i = offset; i < cells.size(); ++i)
          if (cells[i] != "f" + std::to_string(i - offset + 1))
            throw ParseError(line_no, "unknown header column '" + std::string(cells[i]) + "'");
        width = cells.size();
        continue;
      }
      width = cells.size();
    }

    if (cells.size() != width)
      throw ParseError(line_no, "ragged row: expected " + std::to_string(width) + " cells, got " +
                                    std::to_string(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (has_label && i == 0) {
        const auto c = detail::parse_index(cells[i]);
        if (!c) throw ParseError(line_no, "label is not a non-negative integer: '" + std::string(cells[i]) + "'");
        cls.push_back(*c);
        continue;
      }
      const auto v = detail::parse_double(cells[i]);
      if (!v) throw ParseError(line_no, "non-numeric cell '" + std::string(cells[i]) + "'");
      values.push_back(*v);
    }
    ++rows;
  }
  const std::size_t dim = width - (has_label ? 1 : 0);
  Sample s{DenseMatrix(rows, dim, std::move(values)), std::nullopt, 0};
  if (has_label) {
    s.classes = detail::classes_from(cls);
    s.labels = one_hot(cls, s.classes);
  }
  return s;
}

inline Sample load_dense_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_dense_csv(in);
}

inline void write_dense_csv(const Sample& s, std::ostream& out) {
  const DenseMatrix x = to_dense(s.features);
  if (s.labels) out << "label,";
  for (std::size_t j = 0; j < x.cols(); ++j) out << (j ? ",f" : "f") << (j + 1);
  out << '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (s.labels) out << s.class_of(r) << ',';
    for (std::size_t j = 0; j < x.cols(); ++j) out << (j ? "," : "") << detail::format_double(x(r, j));
    out << '\n';
  }
}

// Sparse line format: optional "#dim N" first line, then
// "<label> <idx>:<val> ..." with 0-based, strictly increasing indices.
inline Sample parse_sparse(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> declared_dim;
  std::vector<std::vector<SparseRowMatrix::Entry>> rows;
  std::vector<std::size_t> cls;
  std::size_t max_index_plus_one = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      if (!rows.empty() || declared_dim) throw ParseError(line_no, "'#dim' is only allowed as the first line");
      std::istringstream hdr{std::string(trimmed)};
      std::string tag, value;
      hdr >> tag >> value;
      const auto d = detail::parse_index(value);
      if (tag != "#dim" || !d) throw ParseError(line_no, "expected '#dim N'");
      declared_dim = *d;
      continue;
    }
    std::vector<SparseRowMatrix::Entry> entries;
    std::istringstream tokens{std::string(trimmed)};
    std::string tok;
    tokens >> tok;
    const auto label = detail::parse_index(tok);
    if (!label) throw ParseError(line_no, "malformed label '" + tok + "'");
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(line_no, "malformed token '" + tok + "'");
      const auto idx = detail::parse_index(std::string_view(tok).substr(0, colon));
      const auto val = detail::parse_double(std::string_view(tok).substr(colon + 1));
      if (!idx || !val) throw ParseError(line_no, "malformed token '" + tok + "'");
      if (!entries.empty() && *idx <= entries.back().index)
        throw ParseError(line_no, "indices not increasing at '" + tok + "'");
      if (declared_dim && *idx >= *declared_dim)
        throw ParseError(line_no, "index " + std::to_string(*idx) + " >= declared dim");
      entries.push_back({*idx, *val});
      max_index_plus_one = std::max(max_index_plus_one, *idx + 1);
    }
    rows.push_back(std::move(entries));
    cls.push_back(*label);
  }

  SparseRowMatrix x(declared_dim.value_or(max_index_plus_one));
  for (const auto& r : rows) x.push_row(r);
  Sample s{std::move(x), std::nullopt, detail::classes_from(cls)};
  s.labels = one_hot(cls, s.classes);
  return s;
}

inline Sample load_sparse(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_sparse(in);
}

inline void write_sparse(const Sample& s, std::ostream& out) {
  if (!s.labels) throw DomainError("write_sparse: the sparse format requires labels");
  out << "#dim " << s.dim() << '\n';
  auto emit = [&](std::size_t r, auto&& entries) {
    out << s.class_of(r);
    for (const auto& [idx, val] : entries) out << ' ' << idx << ':' << detail::format_double(val);
    out << '\n';
  };
  if (const auto* sp = std::get_if<SparseRowMatrix>(&s.features)) {
    for (std::size_t r = 0; r < sp->rows(); ++r) {
      std::vector<std::pair<std::size_t, double>> e;
      for (const auto& x : sp->row(r)) e.emplace_back(x.index, x.value);
      emit(r, e);
    }
    return;
  }
  const auto& d = std::get<DenseMatrix>(s.features);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    std::vector<std::pair<std::size_t, double>> e;
    for (std::size_t j = 0; j < d.cols(); ++j)
      if (d(r, j) != 0.0) e.emplace_back(j, d(r, j));
    emit(r, e);
  }
}

// Dense if the path ends in ".csv", sparse line format otherwise.
inline Sample load_sample(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return load_dense_csv(path);
  return load_sparse(path);
}

// ---------------------------------------------------------------------------

// Seeded shuffle, then a split whose per-class counts follow the largest
// remainder rule, so each class is within one item of its proportional share.
inline std::pair<Sample, Sample> split(const Sample& s, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("split: fraction must be in (0, 1)");
  const std::size_t n = s.rows();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t groups = s.labels ? s.classes : 1;
  std::vector<std::size_t> count(groups, 0);
  for (std::size_t i = 0; i < n; ++i) ++count[s.labels ? s.class_of(i) : 0];

  const auto total_first = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> take(groups);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const double exact = fraction * static_cast<double>(count[g]);
    take[g] = static_cast<std::size_t>(std::floor(exact));
    assigned += take[g];
    remainders.emplace_back(exact - std::floor(exact), g);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total_first && i < remainders.size(); ++i) {
    const auto g = remainders[i].second;
    if (take[g] < count[g]) {
      ++take[g];
      ++assigned;
    }
  }

  std::vector<std::size_t> first, second;
  std::vector<std::size_t> seen(groups, 0);
  for (auto i : order) {
    const std::size_t g = s.labels ? s.class_of(i) : 0;
    (seen[g]++ < take[g] ? first : second).push_back(i);
  }
  if (first.empty() || second.empty()) throw DomainError("split: one side would be empty");
  return {subset(s, first), subset(s, second)};
}

}  // namespace cmdalign
