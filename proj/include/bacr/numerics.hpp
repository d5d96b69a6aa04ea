#ifndef BACR_NUMERICS_HPP
#define BACR_NUMERICS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace bacr {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Thrown on shape mismatches between parameters, caches and inputs.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Activation { SiLU, Identity };

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar silu(Scalar x) {
  return x * sigmoid(x);
}

/// d/dx [x * sigmoid(x)] = s + x s (1 - s)
template <typename Scalar>
Scalar silu_grad(Scalar x) {
  const Scalar s = sigmoid(x);
  return s + x * s * (Scalar(1) - s);
}

/// Numerically stable softmax. Throws on empty input.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty logits");
  const Scalar shift = logits.maxCoeff();
  Vector<Scalar> p = (logits.array() - shift).exp().matrix();
  p /= p.sum();
  return p;
}

/// Log-softmax with the same max shift as softmax.
template <typename Derived>
Vector<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::log;
  if (logits.size() == 0) throw std::invalid_argument("log_softmax: empty logits");
  const Scalar shift = logits.maxCoeff();
  const Scalar lse = shift + log((logits.array() - shift).exp().sum());
  return (logits.array() - lse).matrix();
}

// ---------------------------------------------------------------------------
// Two-layer perceptron: y = W2 act(W1 x + b1) + b2

template <typename Scalar>
struct MlpParams {
  Matrix<Scalar> weight1;
  Vector<Scalar> bias1;
  Matrix<Scalar> weight2;
  Vector<Scalar> bias2;
  Activation activation = Activation::SiLU;

  MlpParams() = default;
  MlpParams(Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
            Activation act = Activation::SiLU)
      : weight1(Matrix<Scalar>::Zero(hidden, in)),
        bias1(Vector<Scalar>::Zero(hidden)),
        weight2(Matrix<Scalar>::Zero(out, hidden)),
        bias2(Vector<Scalar>::Zero(out)),
        activation(act) {}

  Eigen::Index input_dim() const { return weight1.cols(); }
  Eigen::Index hidden_dim() const { return weight1.rows(); }
  Eigen::Index output_dim() const { return weight2.rows(); }

  void check_shape() const {
    if (bias1.size() != weight1.rows() || weight2.cols() != weight1.rows() ||
        bias2.size() != weight2.rows())
      throw DimensionError("MlpParams: inconsistent inner dimensions");
  }

  MlpParams zeros_like() const {
    return MlpParams(input_dim(), hidden_dim(), output_dim(), activation);
  }

  template <typename Other>
  MlpParams<Other> cast() const {
    MlpParams<Other> out;
    out.weight1 = weight1.template cast<Other>();
    out.bias1 = bias1.template cast<Other>();
    out.weight2 = weight2.template cast<Other>();
    out.bias2 = bias2.template cast<Other>();
    out.activation = activation;
    return out;
  }

  template <typename F>
  void visit(std::string_view prefix, F&& f) {
    const std::string p(prefix);
    f(p + "weight1", weight1);
    f(p + "bias1", bias1);
    f(p + "weight2", weight2);
    f(p + "bias2", bias2);
  }
  template <typename F>
  void visit(std::string_view prefix, F&& f) const {
    const std::string p(prefix);
    f(p + "weight1", weight1);
    f(p + "bias1", bias1);
    f(p + "weight2", weight2);
    f(p + "bias2", bias2);
  }
};

template <typename Scalar>
struct ForwardCache {
  Vector<Scalar> input;
  Vector<Scalar> pre;     // W1 x + b1
  Vector<Scalar> hidden;  // act(pre)
};

template <typename Scalar>
struct MlpOutput {
  Vector<Scalar> y;
  ForwardCache<Scalar> cache;
};

template <typename Scalar>
struct MlpGradient {
  MlpParams<Scalar> params;
  Vector<Scalar> input;
};

template <typename Scalar>
Vector<Scalar> apply_activation(Activation act, const Vector<Scalar>& pre) {
  if (act == Activation::Identity) return pre;
  return pre.unaryExpr([](Scalar v) { return silu(v); });
}

template <typename Scalar, typename Derived>
MlpOutput<Scalar> mlp_forward(const MlpParams<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != p.input_dim())
    throw DimensionError("mlp_forward: input has " + std::to_string(x.size()) +
                         " entries, weight1 expects " + std::to_string(p.input_dim()));
  MlpOutput<Scalar> out;
  out.cache.input = x;
  out.cache.pre = p.weight1 * out.cache.input + p.bias1;
  out.cache.hidden = apply_activation(p.activation, out.cache.pre);
  out.y = p.weight2 * out.cache.hidden + p.bias2;
  return out;
}

/// Exact reverse pass for mlp_forward. The cache must come from a forward
/// call on parameters of the same shape.
template <typename Scalar, typename Derived>
MlpGradient<Scalar> mlp_backward(const MlpParams<Scalar>& p, const ForwardCache<Scalar>& cache,
                                 const Eigen::MatrixBase<Derived>& grad_y) {
  if (cache.input.size() != p.input_dim() || cache.pre.size() != p.hidden_dim() ||
      cache.hidden.size() != p.hidden_dim())
    throw DimensionError("mlp_backward: cache does not match parameter shapes");
  if (grad_y.size() != p.output_dim()) throw DimensionError("mlp_backward: grad_y size mismatch");

  MlpGradient<Scalar> g;
  g.params.activation = p.activation;
  g.params.bias2 = grad_y;
  g.params.weight2 = g.params.bias2 * cache.hidden.transpose();
  Vector<Scalar> grad_hidden = p.weight2.transpose() * g.params.bias2;
  if (p.activation == Activation::SiLU) {
    for (Eigen::Index i = 0; i < grad_hidden.size(); ++i) grad_hidden[i] *= silu_grad(cache.pre[i]);
  }
  g.params.bias1 = grad_hidden;
  g.params.weight1 = grad_hidden * cache.input.transpose();
  g.input = p.weight1.transpose() * grad_hidden;
  return g;
}

// ---------------------------------------------------------------------------
// Generic parameter plumbing over anything exposing visit(prefix, f).

template <typename Params>
Eigen::Index parameter_count(const Params& p) {
  Eigen::Index n = 0;
  p.visit("", [&](const std::string&, const auto& t) { n += t.size(); });
  return n;
}

template <typename Scalar, typename Params>
Vector<Scalar> flatten(const Params& p) {
  Vector<Scalar> out(parameter_count(p));
  Eigen::Index off = 0;
  p.visit("", [&](const std::string&, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) out[off + i] = static_cast<Scalar>(t.data()[i]);
    off += t.size();
  });
  return out;
}

template <typename Params, typename Derived>
void unflatten(Params& p, const Eigen::MatrixBase<Derived>& flat) {
  if (flat.size() != parameter_count(p)) throw DimensionError("unflatten: size mismatch");
  Eigen::Index off = 0;
  p.visit("", [&](const std::string&, auto& t) {
    using T = typename std::decay_t<decltype(t)>::Scalar;
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(flat[off + i]);
    off += t.size();
  });
}

/// p += scale * g, tensor by tensor. Shapes must agree.
template <typename Params>
void add_scaled(Params& p, const Params& g, double scale) {
  VectorXd flat = flatten<double>(p);
  flat += scale * flatten<double>(g);
  unflatten(p, flat);
}

template <typename Params>
bool all_finite(const Params& p) {
  bool ok = true;
  p.visit("", [&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

/// Xavier-uniform fill: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar, typename Rng>
void xavier_uniform(Matrix<Scalar>& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar, typename Rng>
MlpParams<Scalar> make_mlp(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Activation act,
                           Rng& rng) {
  MlpParams<Scalar> p(in, hidden, out, act);
  xavier_uniform(p.weight1, rng);
  xavier_uniform(p.weight2, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checker.

/// Compares `analytic` to central differences of `f` around `p` and returns
/// the worst entrywise relative error |a - n| / max(|a|, |n|, 1e-8).
/// Throws std::domain_error if f(p) is not finite.
template <typename Scalar, typename F>
Scalar grad_check(F&& f, const Vector<Scalar>& p, const Vector<Scalar>& analytic, Scalar eps) {
  using std::abs;
  using std::max;
  if (analytic.size() != p.size()) throw DimensionError("grad_check: gradient size mismatch");
  const Scalar f0 = f(p);
  if (!std::isfinite(static_cast<double>(f0))) throw std::domain_error("grad_check: f(p) is not finite");
  Scalar worst = 0;
  Vector<Scalar> probe = p;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    probe[i] = p[i] + eps;
    const Scalar up = f(probe);
    probe[i] = p[i] - eps;
    const Scalar down = f(probe);
    probe[i] = p[i];
    const Scalar numeric = (up - down) / (Scalar(2) * eps);
    const Scalar denom = max(max(abs(analytic[i]), abs(numeric)), Scalar(1e-8));
    worst = max(worst, abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace bacr

#endif  // BACR_NUMERICS_HPP
