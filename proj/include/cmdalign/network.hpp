#pragma once

// Single-hidden-layer classifier: h0 = sigm(W x + b), h = softmax(V h0 + c),
// with analytic gradients of the source cross-entropy and of the CMD between
// source and target hidden activations.
// The V gradient uses h0(X_S)^T and the b and W gradients carry the sigmoid
// derivative h0 (1 - h0).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "cmdalign/distances.hpp"
#include "cmdalign/errors.hpp"
#include "cmdalign/moments.hpp"
#include "cmdalign/numerics.hpp"

namespace cmdalign {

struct NetworkParams {
  DenseMatrix W;  // hidden x input
  Vector b;       // hidden
  DenseMatrix V;  // classes x hidden
  Vector c;       // classes
  std::uint64_t seed = 0;

  static NetworkParams zeros(std::size_t input, std::size_t hidden, std::size_t classes) {
    return {DenseMatrix(hidden, input), Vector(hidden, 0.0), DenseMatrix(classes, hidden),
            Vector(classes, 0.0), 0};
  }

  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, biases zero.
  static NetworkParams initialize(std::size_t input, std::size_t hidden, std::size_t classes,
                                  std::uint64_t seed) {
    auto p = zeros(input, hidden, classes);
    p.seed = seed;
    Rng rng(seed);
    const double lim0 = std::sqrt(6.0 / static_cast<double>(input + hidden));
    for (auto& w : p.W.data()) w = rng.uniform(-lim0, lim0);
    const double lim1 = std::sqrt(6.0 / static_cast<double>(hidden + classes));
    for (auto& v : p.V.data()) v = rng.uniform(-lim1, lim1);
    return p;
  }

  std::size_t input_dim() const noexcept { return W.cols(); }
  std::size_t hidden() const noexcept { return W.rows(); }
  std::size_t classes() const noexcept { return V.rows(); }

  void validate() const {
    detail::require_dims(b.size() == W.rows() && V.cols() == W.rows() && c.size() == V.rows(),
                         "NetworkParams: inconsistent shapes");
  }

  std::array<std::span<double>, 4> blocks() {
    return {std::span<double>(W.data()), std::span<double>(b), std::span<double>(V.data()),
            std::span<double>(c)};
  }
  std::array<std::span<const double>, 4> blocks() const {
    return {std::span<const double>(W.data()), std::span<const double>(b),
            std::span<const double>(V.data()), std::span<const double>(c)};
  }

  bool finite() const {
    for (auto blk : blocks())
      if (!all_finite(blk)) return false;
    return true;
  }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

struct Gradients {
  DenseMatrix dW;
  Vector db;
  DenseMatrix dV;
  Vector dc;

  static Gradients zeros_like(const NetworkParams& p) {
    return {DenseMatrix(p.W.rows(), p.W.cols()), Vector(p.b.size(), 0.0),
            DenseMatrix(p.V.rows(), p.V.cols()), Vector(p.c.size(), 0.0)};
  }

  std::array<std::span<double>, 4> blocks() {
    return {std::span<double>(dW.data()), std::span<double>(db), std::span<double>(dV.data()),
            std::span<double>(dc)};
  }
  std::array<std::span<const double>, 4> blocks() const {
    return {std::span<const double>(dW.data()), std::span<const double>(db),
            std::span<const double>(dV.data()), std::span<const double>(dc)};
  }

  // this += scale * other
  void add_scaled(const Gradients& other, double scale) {
    auto dst = blocks();
    const auto src = other.blocks();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      detail::require_dims(dst[k].size() == src[k].size(), "Gradients: shape mismatch");
      for (std::size_t i = 0; i < dst[k].size(); ++i) dst[k][i] += scale * src[k][i];
    }
  }

  bool finite() const {
    for (auto blk : blocks())
      if (!all_finite(blk)) return false;
    return true;
  }
};

struct ForwardTrace {
  DenseMatrix hidden;  // h0(X), rows in (0, 1)
  DenseMatrix output;  // h(X), rows sum to 1
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <class Matrix>
DenseMatrix hidden_activations(const NetworkParams& p, const Matrix& x) {
  p.validate();
  detail::require_dims(x.cols() == p.input_dim(), "forward: input dimension != W.cols");
  DenseMatrix h0(x.rows(), p.hidden());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto out = h0.row(n);
    for (std::size_t j = 0; j < p.hidden(); ++j) out[j] = sigmoid(x.row_dot(n, p.W.row(j)) + p.b[j]);
  }
  return h0;
}

inline DenseMatrix hidden_activations(const NetworkParams& p, const Features& x) {
  return std::visit([&](const auto& m) { return hidden_activations(p, m); }, x);
}

// Row-wise softmax(V h0 + c).
inline DenseMatrix output_layer(const NetworkParams& p, const DenseMatrix& h0) {
  DenseMatrix out(h0.rows(), p.classes());
  for (std::size_t n = 0; n < h0.rows(); ++n) {
    auto o = out.row(n);
    double mx = -INFINITY;
    for (std::size_t i = 0; i < p.classes(); ++i) {
      o[i] = p.V.row_dot(i, h0.row(n)) + p.c[i];
      mx = std::max(mx, o[i]);
    }
    double z = 0.0;
    for (auto& v : o) {
      v = std::exp(v - mx);
      z += v;
    }
    for (auto& v : o) v /= z;
  }
  return out;
}

template <class Matrix>
ForwardTrace forward(const NetworkParams& p, const Matrix& x) {
  ForwardTrace t{hidden_activations(p, x), {}};
  t.output = output_layer(p, t.hidden);
  return t;
}

inline ForwardTrace forward(const NetworkParams& p, const Features& x) {
  return std::visit([&](const auto& m) { return forward(p, m); }, x);
}

inline constexpr double kLogClamp = 1e-12;

// Mean over rows of -sum_i y_i log h_i, log argument clamped at 1e-12.
inline double cross_entropy_loss(const DenseMatrix& output, const DenseMatrix& labels) {
  detail::require_dims(output.rows() == labels.rows() && output.cols() == labels.cols(),
                       "cross_entropy_loss: label/output shape mismatch");
  if (output.rows() == 0) throw EmptySampleError("cross_entropy_loss: empty sample");
  double total = 0.0;
  for (std::size_t n = 0; n < output.rows(); ++n) {
    const auto h = output.row(n);
    const auto y = labels.row(n);
    for (std::size_t i = 0; i < h.size(); ++i)
      if (y[i] != 0.0) total -= y[i] * std::log(std::max(h[i], kLogClamp));
  }
  return total / static_cast<double>(output.rows());
}

inline double cross_entropy_loss(const ForwardTrace& t, const DenseMatrix& labels) {
  return cross_entropy_loss(t.output, labels);
}

namespace detail {

// Accumulates dW += delta_n x_n^T and db += delta_n over the rows of x.
template <class Matrix>
void backprop_hidden(const Matrix& x, const DenseMatrix& delta, Gradients& g) {
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const auto d = delta.row(n);
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (d[j] == 0.0) continue;
      g.db[j] += d[j];
      x.row_axpy(n, d[j], g.dW.row(j));
    }
  }
}

}  // namespace detail

// Gradients of the mean cross-entropy:
//   dc = E[h - y], dV = E[(h - y) h0^T],
//   db = E[V^T (h - y) . h0 . (1 - h0)], dW = E[(V^T (h - y) . h0 . (1 - h0)) x^T].
template <class Matrix>
Gradients loss_gradients(const NetworkParams& p, const Matrix& x, const DenseMatrix& labels) {
  detail::require_dims(labels.rows() == x.rows() && labels.cols() == p.classes(),
                       "loss_gradients: label shape mismatch");
  if (x.rows() == 0) throw EmptySampleError("loss_gradients: empty sample");
  const ForwardTrace t = forward(p, x);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  Gradients g = Gradients::zeros_like(p);
  DenseMatrix delta_hidden(x.rows(), p.hidden());
  Vector err(p.classes());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const auto h = t.output.row(n);
    const auto y = labels.row(n);
    const auto h0 = t.hidden.row(n);
    for (std::size_t i = 0; i < err.size(); ++i) {
      err[i] = (h[i] - y[i]) * inv_n;
      g.dc[i] += err[i];
      auto dv = g.dV.row(i);
      for (std::size_t j = 0; j < h0.size(); ++j) dv[j] += err[i] * h0[j];
    }
    auto dh = delta_hidden.row(n);
    for (std::size_t j = 0; j < h0.size(); ++j) {
      double back = 0.0;
      for (std::size_t i = 0; i < err.size(); ++i) back += p.V(i, j) * err[i];
      dh[j] = back * h0[j] * (1.0 - h0[j]);
    }
  }
  detail::backprop_hidden(x, delta_hidden, g);
  return g;
}

inline Gradients loss_gradients(const NetworkParams& p, const Features& x, const DenseMatrix& labels) {
  return std::visit([&](const auto& m) { return loss_gradients(p, m, labels); }, x);
}

// Order terms whose moment difference has a norm below this are treated as
// sitting at the minimum and contribute a zero subgradient.
inline constexpr double kNormSingularity = 1e-12;

namespace detail {

// d cmd / d h0 for every row of one sample. `sign` is +1 for the source side
// and -1 for the target side; `unit[j-1]` is a_j (c_j(S) - c_j(T)) / ||.||.
inline DenseMatrix cmd_activation_sensitivity(const DenseMatrix& h0, const CentralMomentVector& mom,
                                              const std::vector<Vector>& unit, double sign) {
  const std::size_t rows = h0.rows(), m = h0.cols();
  const int k = static_cast<int>(unit.size());
  const double inv_n = 1.0 / static_cast<double>(rows);
  const Vector& mu = mom.mean();

  // Mean of d^p for p = 1..k-1 (p = 1 is zero up to rounding).
  std::vector<Vector> power_mean(static_cast<std::size_t>(std::max(k - 1, 0)), Vector(m, 0.0));
  for (std::size_t n = 0; n < rows && k > 1; ++n) {
    const auto h = h0.row(n);
    for (std::size_t i = 0; i < m; ++i) {
      const double d = h[i] - mu[i];
      double pw = 1.0;
      for (int q = 1; q < k; ++q) {
        pw *= d;
        power_mean[static_cast<std::size_t>(q - 1)][i] += pw;
      }
    }
  }
  for (auto& v : power_mean)
    for (auto& x : v) x *= inv_n;

  DenseMatrix sens(rows, m);
  for (std::size_t n = 0; n < rows; ++n) {
    const auto h = h0.row(n);
    auto s = sens.row(n);
    for (std::size_t i = 0; i < m; ++i) {
      const double d = h[i] - mu[i];
      double acc = unit[0][i];
      double pw = 1.0;  // d^{j-1}
      for (int j = 2; j <= k; ++j) {
        pw *= d;
        const double centred = pw - power_mean[static_cast<std::size_t>(j - 2)][i];
        acc += unit[static_cast<std::size_t>(j - 1)][i] * static_cast<double>(j) * centred;
      }
      s[i] = sign * acc * inv_n;
    }
  }
  return sens;
}

}  // namespace detail

// Analytic gradient of cmd(h0(Xs), h0(Xt)) with respect to W and b. dV and dc
// are returned as zeros. Only the marginal monomial layout is supported.
template <class Matrix>
Gradients cmd_gradients(const NetworkParams& p, const Matrix& xs, const Matrix& xt, const CmdConfig& cfg) {
  cfg.validate();
  if (cfg.mode != MonomialMode::marginal)
    throw DomainError("cmd_gradients: only the marginal monomial mode is differentiated");
  if (xs.rows() == 0 || xt.rows() == 0) throw EmptySampleError("cmd_gradients: empty sample");
  detail::require_dims(xs.cols() == xt.cols(), "cmd_gradients: dimension mismatch");

  const DenseMatrix hs = hidden_activations(p, xs);
  const DenseMatrix ht = hidden_activations(p, xt);
  const CentralMomentVector ms = central_moments(hs, cfg.k, cfg.mode);
  const CentralMomentVector mt = central_moments(ht, cfg.k, cfg.mode);

  std::vector<Vector> unit;
  unit.reserve(static_cast<std::size_t>(cfg.k));
  for (int j = 1; j <= cfg.k; ++j) {
    Vector diff = elementwise(ElementOp::sub, ms.at(j), mt.at(j));
    const double nrm = norm2(diff);
    const double scale = nrm < kNormSingularity ? 0.0 : cfg.weight(j) / nrm;
    for (auto& v : diff) v *= scale;
    unit.push_back(std::move(diff));
  }

  Gradients g = Gradients::zeros_like(p);
  auto backprop_side = [&](const Matrix& x, const DenseMatrix& h0, const CentralMomentVector& mom, double sign) {
    DenseMatrix delta = detail::cmd_activation_sensitivity(h0, mom, unit, sign);
    for (std::size_t n = 0; n < h0.rows(); ++n) {
      const auto h = h0.row(n);
      auto d = delta.row(n);
      for (std::size_t j = 0; j < h.size(); ++j) d[j] *= h[j] * (1.0 - h[j]);
    }
    detail::backprop_hidden(x, delta, g);
  };
  backprop_side(xs, hs, ms, 1.0);
  backprop_side(xt, ht, mt, -1.0);
  return g;
}

inline Gradients cmd_gradients(const NetworkParams& p, const Features& xs, const Features& xt,
                               const CmdConfig& cfg) {
  if (xs.index() != xt.index()) return cmd_gradients(p, to_dense(xs), to_dense(xt), cfg);
  return std::visit(
      [&](const auto& s) {
        using M = std::decay_t<decltype(s)>;
        return cmd_gradients(p, s, std::get<M>(xt), cfg);
      },
      xs);
}

// ---------------------------------------------------------------------------
// Finite-difference oracle.

// Max over parameter coordinates of |a - f| / max(1e-8, |a| + |f|), where f is
// the central difference (J(p + h e) - J(p - h e)) / 2h.
inline double finite_difference_error(const NetworkParams& p, const Gradients& analytic,
                                      const std::function<double(const NetworkParams&)>& objective,
                                      double step) {
  if (!(step > 0.0)) throw DomainError("finite_difference_error: step must be > 0");
  NetworkParams probe = p;
  const auto grads = analytic.blocks();
  auto blocks = probe.blocks();
  double worst = 0.0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    detail::require_dims(blocks[k].size() == grads[k].size(), "finite_difference_error: shape mismatch");
    for (std::size_t i = 0; i < blocks[k].size(); ++i) {
      const double orig = blocks[k][i];
      blocks[k][i] = orig + step;
      const double up = objective(probe);
      blocks[k][i] = orig - step;
      const double down = objective(probe);
      blocks[k][i] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double a = grads[k][i];
      worst = std::max(worst, std::fabs(a - fd) / std::max(1e-8, std::fabs(a) + std::fabs(fd)));
    }
  }
  return worst;
}

template <class Matrix>
double loss_gradient_check(const NetworkParams& p, const Matrix& x, const DenseMatrix& labels,
                           double step = 1e-5) {
  return finite_difference_error(p, loss_gradients(p, x, labels),
                                 [&](const NetworkParams& q) { return cross_entropy_loss(forward(q, x), labels); },
                                 step);
}

template <class Matrix>
double cmd_gradient_check(const NetworkParams& p, const Matrix& xs, const Matrix& xt, const CmdConfig& cfg,
                          double step = 1e-5) {
  return finite_difference_error(
      p, cmd_gradients(p, xs, xt, cfg),
      [&](const NetworkParams& q) {
        return cmd_estimate(hidden_activations(q, xs), hidden_activations(q, xt), cfg).value;
      },
      step);
}

}  // namespace cmdalign
