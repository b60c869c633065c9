#pragma once

// Dense/sparse containers, small vector kernels and the seeded generator that
// every other module builds on. All arithmetic is double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "cmdalign/errors.hpp"

namespace cmdalign {

using Vector = std::vector<double>;

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    detail::require_dims(data_.size() == rows_ * cols_,
                         "DenseMatrix: entries.size() != rows*cols");
  }

  static DenseMatrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    DenseMatrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      detail::require_dims(rows[i].size() == m.cols_, "DenseMatrix: ragged rows");
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  // <row r, w>
  double row_dot(std::size_t r, std::span<const double> w) const {
    const auto x = row(r);
    double acc = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) acc += x[j] * w[j];
    return acc;
  }

  // out += alpha * row r
  void row_axpy(std::size_t r, double alpha, std::span<double> out) const {
    const auto x = row(r);
    for (std::size_t j = 0; j < cols_; ++j) out[j] += alpha * x[j];
  }

  DenseMatrix select_rows(std::span<const std::size_t> idx) const {
    DenseMatrix out(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto src = row(idx[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  DenseMatrix to_dense() const { return *this; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Compressed sparse rows. Column indices are strictly increasing per row.
class SparseRowMatrix {
 public:
  struct Entry {
    std::size_t index;
    double value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  SparseRowMatrix() : row_ptr_{0} {}
  explicit SparseRowMatrix(std::size_t cols) : cols_(cols), row_ptr_{0} {}

  // Throws DomainError on unsorted, duplicate or out-of-range indices.
  void push_row(std::span<const Entry> entries) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].index >= cols_)
        throw DomainError("SparseRowMatrix: index out of range");
      if (i > 0 && entries[i].index <= entries[i - 1].index)
        throw DomainError("SparseRowMatrix: indices not strictly increasing");
    }
    entries_.insert(entries_.end(), entries.begin(), entries.end());
    row_ptr_.push_back(entries_.size());
    ++rows_;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return entries_.size(); }

  std::span<const Entry> row(std::size_t r) const {
    return {entries_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  double row_dot(std::size_t r, std::span<const double> w) const {
    double acc = 0.0;
    for (const auto& e : row(r)) acc += e.value * w[e.index];
    return acc;
  }

  void row_axpy(std::size_t r, double alpha, std::span<double> out) const {
    for (const auto& e : row(r)) out[e.index] += alpha * e.value;
  }

  SparseRowMatrix select_rows(std::span<const std::size_t> idx) const {
    SparseRowMatrix out(cols_);
    for (auto i : idx) out.push_row(row(i));
    return out;
  }

  DenseMatrix to_dense() const {
    DenseMatrix m(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (const auto& e : row(r)) m(r, e.index) = e.value;
    return m;
  }

  friend bool operator==(const SparseRowMatrix&, const SparseRowMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<Entry> entries_;
};

// Either storage; models that only need row_dot/row_axpy take this.
using Features = std::variant<DenseMatrix, SparseRowMatrix>;

inline std::size_t rows_of(const Features& f) {
  return std::visit([](const auto& m) { return m.rows(); }, f);
}
inline std::size_t cols_of(const Features& f) {
  return std::visit([](const auto& m) { return m.cols(); }, f);
}
inline DenseMatrix to_dense(const Features& f) {
  return std::visit([](const auto& m) { return m.to_dense(); }, f);
}
inline Features select_rows(const Features& f, std::span<const std::size_t> idx) {
  return std::visit([&](const auto& m) -> Features { return m.select_rows(idx); }, f);
}

// xoshiro256** seeded through splitmix64. The stream is fully determined by
// the 64-bit seed and uses no platform-dependent distribution code.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  std::uint64_t seed() const noexcept { return seed_; }

  result_type operator()() { return next(); }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Independent generator for a named sub-stream of this seed.
  Rng derive(std::uint64_t stream) const {
    std::uint64_t s = seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    return Rng(splitmix64(s));
  }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection sampled.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller, one variate per call pair cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <class T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  static std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Vector matvec(const DenseMatrix& m, std::span<const double> v) {
  detail::require_dims(m.cols() == v.size(), "matvec: m.cols != v.size");
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m.row_dot(r, v);
  return out;
}

inline Vector matvec(const SparseRowMatrix& m, std::span<const double> v) {
  detail::require_dims(m.cols() == v.size(), "matvec: m.cols != v.size");
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m.row_dot(r, v);
  return out;
}

template <class Matrix>
Vector sample_mean(const Matrix& x) {
  if (x.rows() == 0) throw EmptySampleError("sample_mean: empty sample");
  Vector mean(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) x.row_axpy(r, 1.0, mean);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (auto& m : mean) m *= inv;
  return mean;
}

inline Vector sample_mean(const Features& f) {
  return std::visit([](const auto& m) { return sample_mean(m); }, f);
}

enum class ElementOp { add, sub, mul, pow };

namespace detail {
inline double apply(ElementOp op, double a, double b) {
  switch (op) {
    case ElementOp::add: return a + b;
    case ElementOp::sub: return a - b;
    case ElementOp::mul: return a * b;
    case ElementOp::pow: return std::pow(a, b);
  }
  return 0.0;
}
}  // namespace detail

inline Vector elementwise(ElementOp op, std::span<const double> a, std::span<const double> b) {
  detail::require_dims(a.size() == b.size(), "elementwise: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = detail::apply(op, a[i], b[i]);
  return out;
}

inline Vector elementwise(ElementOp op, std::span<const double> a, double b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = detail::apply(op, a[i], b);
  return out;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Integer power by repeated multiplication; exact for small orders and
// bitwise-reproducible, unlike std::pow on some platforms.
inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace cmdalign
