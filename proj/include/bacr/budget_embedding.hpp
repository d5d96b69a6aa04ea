#ifndef BACR_BUDGET_EMBEDDING_HPP
#define BACR_BUDGET_EMBEDDING_HPP

#include "bacr/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace bacr {

/// Inclusive token-budget interval, 0 < min < max.
struct BudgetRange {
  double min = 8;
  double max = 128;

  void validate() const {
    if (!(min > 0 && min < max)) throw std::invalid_argument("BudgetRange: need 0 < b_min < b_max");
  }
  bool contains(double b) const { return b >= min && b <= max; }
  double clamp(double b) const { return b < min ? min : (b > max ? max : b); }
};

/// Interleaved (sin, cos) pairs at frequencies 10000^(-2i/d), i = 0..d/2-1.
template <typename Scalar>
Vector<Scalar> sinusoidal_features(Scalar b, Eigen::Index d) {
  using std::cos;
  using std::pow;
  using std::sin;
  if (d <= 0 || d % 2 != 0) throw std::invalid_argument("sinusoidal_features: d must be positive and even");
  if (b < Scalar(0)) throw std::invalid_argument("sinusoidal_features: negative budget");
  Vector<Scalar> out(d);
  for (Eigen::Index i = 0; i < d / 2; ++i) {
    const Scalar freq = pow(Scalar(10000), -Scalar(2 * i) / Scalar(d));
    out[2 * i] = sin(b * freq);
    out[2 * i + 1] = cos(b * freq);
  }
  return out;
}

/// phi(b) = W2 SiLU(W1 sin_cos(b) + b1) + b2, gated into a hidden state by
/// sigmoid(gate . h).
template <typename Scalar>
struct BudgetEmbedParams {
  MlpParams<Scalar> proj;
  Vector<Scalar> gate;
  BudgetRange range;

  Eigen::Index dim() const { return gate.size(); }

  void check_shape() const {
    proj.check_shape();
    if (dim() % 2 != 0) throw DimensionError("BudgetEmbedParams: dim must be even");
    if (proj.input_dim() != dim() || proj.output_dim() != dim())
      throw DimensionError("BudgetEmbedParams: projection must map dim -> dim");
  }

  BudgetEmbedParams zeros_like() const {
    BudgetEmbedParams z;
    z.proj = proj.zeros_like();
    z.gate = Vector<Scalar>::Zero(gate.size());
    z.range = range;
    return z;
  }

  template <typename Other>
  BudgetEmbedParams<Other> cast() const {
    BudgetEmbedParams<Other> out;
    out.proj = proj.template cast<Other>();
    out.gate = gate.template cast<Other>();
    out.range = range;
    return out;
  }

  template <typename F>
  void visit(std::string_view prefix, F&& f) {
    const std::string p(prefix);
    proj.visit(p + "proj.", f);
    f(p + "gate", gate);
  }
  template <typename F>
  void visit(std::string_view prefix, F&& f) const {
    const std::string p(prefix);
    proj.visit(p + "proj.", f);
    f(p + "gate", gate);
  }
};

/// Xavier projection weights, zero biases, gate ~ Normal(0, gate_std^2).
template <typename Rng>
BudgetEmbedParams<double> make_budget_embed(Eigen::Index dim, BudgetRange range, Rng& rng,
                                            double gate_std = 1e-4) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("make_budget_embed: dim must be positive and even");
  range.validate();
  BudgetEmbedParams<double> p;
  p.proj = make_mlp<double>(dim, dim, dim, Activation::SiLU, rng);
  p.gate.resize(dim);
  std::normal_distribution<double> normal(0.0, gate_std);
  for (Eigen::Index i = 0; i < dim; ++i) p.gate[i] = normal(rng);
  p.range = range;
  return p;
}

template <typename Scalar>
MlpOutput<Scalar> embed_budget_forward(const BudgetEmbedParams<Scalar>& p, Scalar b) {
  if (!p.range.contains(static_cast<double>(b)))
    throw std::out_of_range("embed_budget: budget " + std::to_string(static_cast<double>(b)) +
                            " outside [" + std::to_string(p.range.min) + ", " +
                            std::to_string(p.range.max) + "]");
  return mlp_forward(p.proj, sinusoidal_features(b, p.dim()));
}

template <typename Scalar>
Vector<Scalar> embed_budget(const BudgetEmbedParams<Scalar>& p, Scalar b) {
  return embed_budget_forward(p, b).y;
}

/// Gradient of a loss w.r.t. the embedding parameters given dL/dphi.
template <typename Scalar>
MlpParams<Scalar> embed_budget_backward(const BudgetEmbedParams<Scalar>& p,
                                        const ForwardCache<Scalar>& cache,
                                        const Vector<Scalar>& grad_phi) {
  return mlp_backward(p.proj, cache, grad_phi).params;
}

template <typename Scalar>
Vector<Scalar> gate_inject(const Vector<Scalar>& h, const Vector<Scalar>& phi,
                           const Vector<Scalar>& gate) {
  if (h.size() != phi.size() || h.size() != gate.size())
    throw DimensionError("gate_inject: hidden, embedding and gate must share length");
  return h + sigmoid(gate.dot(h)) * phi;
}

template <typename Scalar>
struct GateGradient {
  Vector<Scalar> hidden;
  Vector<Scalar> phi;
  Vector<Scalar> gate;
};

/// Reverse pass of h' = h + s phi with s = sigmoid(gate . h).
template <typename Scalar>
GateGradient<Scalar> gate_inject_backward(const Vector<Scalar>& h, const Vector<Scalar>& phi,
                                          const Vector<Scalar>& gate, const Vector<Scalar>& grad_out) {
  const Scalar s = sigmoid(gate.dot(h));
  const Scalar ds = grad_out.dot(phi) * s * (Scalar(1) - s);
  GateGradient<Scalar> g;
  g.hidden = grad_out + ds * gate;
  g.phi = s * grad_out;
  g.gate = ds * h;
  return g;
}

}  // namespace bacr

#endif  // BACR_BUDGET_EMBEDDING_HPP
