#ifndef BACR_OBJECTIVE_HPP
#define BACR_OBJECTIVE_HPP

#include "bacr/advantage.hpp"
#include "bacr/parallel.hpp"
#include "bacr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace bacr {

/// -min(rho A, clip(rho, 1 - eps, 1 + eps) A)
template <typename Scalar>
Scalar ppo_loss(Scalar ratio, Scalar adv, Scalar eps_clip) {
  using std::min;
  const Scalar clipped = std::clamp(ratio, Scalar(1) - eps_clip, Scalar(1) + eps_clip);
  return -min(ratio * adv, clipped * adv);
}

/// d ppo_loss / d ratio. Zero wherever the clipped branch is the active minimum.
template <typename Scalar>
Scalar ppo_loss_dratio(Scalar ratio, Scalar adv, Scalar eps_clip) {
  const Scalar clipped = std::clamp(ratio, Scalar(1) - eps_clip, Scalar(1) + eps_clip);
  return ratio * adv <= clipped * adv ? -adv : Scalar(0);
}

inline double total_loss(double policy_loss, double value_loss, double entropy, double c_v, double c_h) {
  return policy_loss + c_v * value_loss - c_h * entropy;
}

/// One rollout as seen by the update step.
struct LossEntry {
  const Task* task = nullptr;
  int budget = 0;
  Trace trace;
  double logprob_old = 0;
  double advantage = 0;  // normalized
  double reward = 0;     // value-regression target
  VectorXd value_phi;    // phi(b) fed to the value head, held constant
};

struct LossWeights {
  double eps_clip = 0.2;
  double c_v = 0.5;
  double c_h = 0.01;
};

template <typename Scalar>
struct ObjectiveResult {
  Scalar total = 0;
  Scalar policy_loss = 0;
  Scalar value_loss = 0;
  Scalar entropy = 0;
  double clip_fraction = 0;
  PolicyParams<Scalar> policy_grad;
  ValueNetParams<Scalar> value_grad;
};

/// L_pi + c_v L_V - c_h H over a batch, with sequence-level importance ratios.
template <typename Scalar>
ObjectiveResult<Scalar> minibatch_objective(const PolicyParams<Scalar>& policy, const ValueNetParams<Scalar>& value,
                                            const std::vector<LossEntry>& batch, const LossWeights& w,
                                            bool want_grad, int workers = 1) {
  using std::exp;
  if (batch.empty()) throw std::invalid_argument("minibatch_objective: empty batch");
  const std::size_t n = batch.size();
  const Scalar inv_n = Scalar(1) / Scalar(n);
  const Scalar eps = Scalar(w.eps_clip);

  struct Part {
    Scalar ppo = 0;
    Scalar entropy = 0;
    bool clipped = false;
    TraceScore<Scalar> score;
  };
  std::vector<Part> parts(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const LossEntry& e = batch[i];
    Part& part = parts[i];
    const TraceScore<Scalar> fwd = score_trace(policy, *e.task, e.budget, e.trace, false);
    const Scalar ratio = exp(fwd.log_prob - Scalar(e.logprob_old));
    const Scalar adv = Scalar(e.advantage);
    part.ppo = ppo_loss(ratio, adv, eps);
    part.entropy = fwd.entropy;
    const Scalar dratio = ppo_loss_dratio(ratio, adv, eps);
    part.clipped = dratio == Scalar(0) && adv != Scalar(0);
    if (want_grad) {
      // d/dtheta of (ppo_i - c_h H_i) / n, with d ratio = ratio d logprob.
      part.score = score_trace(policy, *e.task, e.budget, e.trace, true, dratio * ratio * inv_n,
                               -Scalar(w.c_h) * inv_n);
    }
  });

  ObjectiveResult<Scalar> out;
  if (want_grad) out.policy_grad = policy.zeros_like();
  Vector<Scalar> flat_grad;
  if (want_grad) flat_grad = Vector<Scalar>::Zero(parameter_count(policy));
  std::size_t clipped = 0;
  for (const Part& part : parts) {
    out.policy_loss += part.ppo * inv_n;
    out.entropy += part.entropy * inv_n;
    clipped += part.clipped ? 1 : 0;
    if (want_grad) flat_grad += flatten<Scalar>(part.score.grad);
  }
  if (want_grad) unflatten(out.policy_grad, flat_grad);
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);

  std::vector<ValueSample> samples;
  samples.reserve(n);
  for (const auto& e : batch) samples.push_back({e.task->features, e.value_phi, e.reward});
  ValueLoss<Scalar> vl = value_loss(value, samples, want_grad);
  out.value_loss = vl.loss;
  if (want_grad) {
    out.value_grad = vl.grad;
    const Vector<Scalar> vg = flatten<Scalar>(out.value_grad) * Scalar(w.c_v);
    unflatten(out.value_grad, vg);
  }
  out.total = out.policy_loss + Scalar(w.c_v) * out.value_loss - Scalar(w.c_h) * out.entropy;
  return out;
}

}  // namespace bacr

#endif  // BACR_OBJECTIVE_HPP
