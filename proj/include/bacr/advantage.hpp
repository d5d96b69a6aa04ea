#ifndef BACR_ADVANTAGE_HPP
#define BACR_ADVANTAGE_HPP

#include "bacr/numerics.hpp"
#include "bacr/random.hpp"

#include <string>
#include <vector>

namespace bacr {

enum class EstimatorMode { GroupMean, BudgetGroupMean, ValueBaseline };  // GRPO, BRPO, BCAE

std::string estimator_name(EstimatorMode m);
EstimatorMode estimator_from_name(const std::string& name);

/// Budget-conditioned value head: MLP over [question features, phi(b)] -> scalar.
template <typename Scalar>
struct ValueNetParams {
  MlpParams<Scalar> head;

  Eigen::Index input_dim() const { return head.input_dim(); }

  ValueNetParams zeros_like() const { return {head.zeros_like()}; }

  template <typename Other>
  ValueNetParams<Other> cast() const {
    return {head.template cast<Other>()};
  }

  template <typename F>
  void visit(std::string_view prefix, F&& f) {
    head.visit(std::string(prefix) + "value.head.", f);
  }
  template <typename F>
  void visit(std::string_view prefix, F&& f) const {
    head.visit(std::string(prefix) + "value.head.", f);
  }
};

ValueNetParams<double> make_value_net(Eigen::Index feature_dim, Eigen::Index embed_dim, Eigen::Index hidden,
                                      Rng& rng);

template <typename Scalar>
Vector<Scalar> value_input(const VectorXd& features, const Vector<Scalar>& phi) {
  Vector<Scalar> x(features.size() + phi.size());
  x << features.template cast<Scalar>(), phi;
  return x;
}

template <typename Scalar>
Scalar value_predict(const ValueNetParams<Scalar>& psi, const VectorXd& features, const Vector<Scalar>& phi) {
  if (features.size() + phi.size() != psi.input_dim())
    throw DimensionError("value_predict: input has " + std::to_string(features.size() + phi.size()) +
                         " entries, value head expects " + std::to_string(psi.input_dim()));
  return mlp_forward(psi.head, value_input(features, phi)).y[0];
}

/// One regression example for the value head.
struct ValueSample {
  VectorXd features;
  VectorXd phi;
  double target = 0;
};

template <typename Scalar>
struct ValueLoss {
  Scalar loss = 0;
  ValueNetParams<Scalar> grad;
};

/// mean (V - R)^2 and, optionally, its gradient.
template <typename Scalar>
ValueLoss<Scalar> value_loss(const ValueNetParams<Scalar>& psi, const std::vector<ValueSample>& batch,
                             bool want_grad = true) {
  if (batch.empty()) throw std::invalid_argument("value_loss: empty batch");
  ValueLoss<Scalar> out;
  if (want_grad) out.grad = psi.zeros_like();
  const Scalar inv_n = Scalar(1) / Scalar(batch.size());
  for (const auto& s : batch) {
    const Vector<Scalar> phi = s.phi.template cast<Scalar>();
    if (s.features.size() + phi.size() != psi.input_dim()) throw DimensionError("value_loss: input size mismatch");
    MlpOutput<Scalar> f = mlp_forward(psi.head, value_input(s.features, phi));
    const Scalar err = f.y[0] - Scalar(s.target);
    out.loss += err * err * inv_n;
    if (want_grad) {
      Vector<Scalar> gy(1);
      gy[0] = Scalar(2) * err * inv_n;
      MlpGradient<Scalar> g = mlp_backward(psi.head, f.cache, gy);
      out.grad.head.weight1 += g.params.weight1;
      out.grad.head.bias1 += g.params.bias1;
      out.grad.head.weight2 += g.params.weight2;
      out.grad.head.bias2 += g.params.bias2;
    }
  }
  return out;
}

/// Full-batch gradient descent on value_loss. Returns the per-step loss history.
std::vector<double> fit_value(ValueNetParams<double>& psi, const std::vector<ValueSample>& data, int steps,
                              double learning_rate);

/// R_i - mean(R); requires at least two entries.
std::vector<double> brpo_advantage(const std::vector<double>& rewards);

inline double bcae_advantage(double reward, double value) { return reward - value; }

/// Population standard deviation.
double population_std(const std::vector<double>& xs);

/// A / max(std(A), eps) with the population std convention.
std::vector<double> normalize(const std::vector<double>& advantages, double eps = 1e-6);

/// Partition entries into BRPO groups: entries sharing a budget level, where
/// level = bin of the budget among `levels` equal-width bins of [b_min, b_max].
/// Bins with a single entry are pooled together; a leftover singleton joins
/// the largest group. Every returned group has at least two members when
/// the input has at least two entries.
std::vector<std::vector<int>> budget_level_groups(const std::vector<int>& budgets, double b_min, double b_max,
                                                  int levels);

int budget_level(int budget, double b_min, double b_max, int levels);

}  // namespace bacr

#endif  // BACR_ADVANTAGE_HPP
