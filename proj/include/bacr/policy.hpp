#ifndef BACR_POLICY_HPP
#define BACR_POLICY_HPP

#include "bacr/budget_embedding.hpp"
#include "bacr/environment.hpp"
#include "bacr/numerics.hpp"
#include "bacr/random.hpp"

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

namespace bacr {

/// Step actions. The first three emit a think token; Stop ends thinking and
/// hands over to the answer.
enum class Action : int { Work = 0, Error = 1, Filler = 2, Stop = 3 };
inline constexpr Eigen::Index kNumActions = 4;

inline Token action_token(Action a) { return static_cast<Token>(static_cast<int>(a)); }

struct PolicyShape {
  Eigen::Index feature_dim = 5;
  Eigen::Index hidden = 32;
  Eigen::Index dim = 16;  // hidden-state / budget-embedding width
  Eigen::Index pos_dim = 8;
  double work_scale = 30;
  BudgetRange range;

  Eigen::Index input_dim() const { return feature_dim + pos_dim + 1; }
};

template <typename Scalar>
struct PolicyParams {
  MlpParams<Scalar> input_proj;  // [features, pos_enc(position), work / work_scale] -> dim
  Matrix<Scalar> head;           // dim -> action logits
  BudgetEmbedParams<Scalar> budget_embed;
  Eigen::Index pos_dim = 8;
  double work_scale = 30;

  Eigen::Index dim() const { return head.cols(); }

  void check_shape() const {
    input_proj.check_shape();
    budget_embed.check_shape();
    if (head.rows() != kNumActions || head.cols() != input_proj.output_dim() ||
        budget_embed.dim() != head.cols())
      throw DimensionError("PolicyParams: inconsistent dimensions");
  }

  PolicyParams zeros_like() const {
    PolicyParams z = *this;
    z.input_proj = input_proj.zeros_like();
    z.head.setZero();
    z.budget_embed = budget_embed.zeros_like();
    return z;
  }

  template <typename Other>
  PolicyParams<Other> cast() const {
    PolicyParams<Other> out;
    out.input_proj = input_proj.template cast<Other>();
    out.head = head.template cast<Other>();
    out.budget_embed = budget_embed.template cast<Other>();
    out.pos_dim = pos_dim;
    out.work_scale = work_scale;
    return out;
  }

  template <typename F>
  void visit(std::string_view prefix, F&& f) {
    const std::string p(prefix);
    input_proj.visit(p + "policy.input_proj.", f);
    f(p + "policy.head", head);
    budget_embed.visit(p + "policy.budget_embed.", f);
  }
  template <typename F>
  void visit(std::string_view prefix, F&& f) const {
    const std::string p(prefix);
    input_proj.visit(p + "policy.input_proj.", f);
    f(p + "policy.head", head);
    budget_embed.visit(p + "policy.budget_embed.", f);
  }
};

PolicyParams<double> make_policy(const PolicyShape& shape, Rng& rng);

/// Zeroes the budget embedding so phi(b) == 0 for every b.
template <typename Scalar>
void zero_budget_embedding(PolicyParams<Scalar>& p) {
  p.budget_embed = p.budget_embed.zeros_like();
}

template <typename Scalar>
Vector<Scalar> policy_input(const PolicyParams<Scalar>& p, const Task& task, int position, int work_count) {
  const Eigen::Index f = task.features.size();
  Vector<Scalar> x(f + p.pos_dim + 1);
  x.head(f) = task.features.template cast<Scalar>();
  x.segment(f, p.pos_dim) = sinusoidal_features(Scalar(position), p.pos_dim);
  x[f + p.pos_dim] = Scalar(work_count) / Scalar(p.work_scale);
  return x;
}

template <typename Scalar>
struct StepForward {
  MlpOutput<Scalar> proj;
  Vector<Scalar> gated;
  Vector<Scalar> logits;
};

/// Logits for one step given a precomputed phi(b).
template <typename Scalar>
StepForward<Scalar> step_forward(const PolicyParams<Scalar>& p, const Task& task, int position,
                                 int work_count, const Vector<Scalar>& phi) {
  StepForward<Scalar> s;
  s.proj = mlp_forward(p.input_proj, policy_input(p, task, position, work_count));
  s.gated = gate_inject(s.proj.y, phi, p.budget_embed.gate);
  s.logits = p.head * s.gated;
  return s;
}

/// Budget embedding used by the policy. Zero-budget traces never query the
/// policy, so b == 0 maps to a zero vector instead of a range error.
template <typename Scalar>
Vector<Scalar> policy_phi(const PolicyParams<Scalar>& p, int b) {
  if (b == 0) return Vector<Scalar>::Zero(p.dim());
  return embed_budget(p.budget_embed, Scalar(b));
}

template <typename Scalar>
Vector<Scalar> step_logits(const PolicyParams<Scalar>& p, const Task& task, int position, int b,
                           int work_count) {
  if (position < 0) throw std::invalid_argument("step_logits: negative position");
  if (task.features.size() + p.pos_dim + 1 != p.input_proj.input_dim())
    throw DimensionError("step_logits: task features do not match the policy input");
  return step_forward(p, task, position, work_count, embed_budget(p.budget_embed, Scalar(b))).logits;
}

/// Weighted trace score  w_lp * log pi(t|q,b) + w_ent * H(t)  and its gradient.
template <typename Scalar>
struct TraceScore {
  Scalar log_prob = 0;
  Scalar entropy = 0;  // mean per-step entropy over sampled steps
  int sampled_steps = 0;
  PolicyParams<Scalar> grad;  // only filled when requested
};

namespace detail {

inline void check_trace_for_budget(const Trace& trace, int b) {
  if (b < 0) throw std::invalid_argument("trace scoring: negative budget");
  if (trace.budget_used() > b)
    throw std::invalid_argument("trace scoring: think length " + std::to_string(trace.budget_used()) +
                                " exceeds budget " + std::to_string(b));
  if (trace.stopped && trace.budget_used() == b)
    throw std::invalid_argument("trace scoring: stop event recorded at the budget limit");
  for (Token t : trace.think)
    if (t == Token::Answer) throw std::invalid_argument("trace scoring: ANSWER inside think segment");
}

inline Action step_action(const Trace& trace, int pos) {
  if (pos < trace.budget_used()) return static_cast<Action>(static_cast<int>(trace.think[pos]));
  return Action::Stop;
}

}  // namespace detail

template <typename Scalar>
TraceScore<Scalar> score_trace(const PolicyParams<Scalar>& p, const Task& task, int b, const Trace& trace,
                               bool want_grad, Scalar w_lp = 1, Scalar w_ent = 0) {
  using std::log;
  detail::check_trace_for_budget(trace, b);
  TraceScore<Scalar> out;
  const int steps = trace.budget_used() + (trace.stopped ? 1 : 0);
  out.sampled_steps = steps;
  if (want_grad) out.grad = p.zeros_like();
  if (steps == 0) return out;

  MlpOutput<Scalar> embed;
  if (want_grad) {
    embed = embed_budget_forward(p.budget_embed, Scalar(b));
  } else {
    embed.y = embed_budget(p.budget_embed, Scalar(b));
  }
  const Vector<Scalar>& phi = embed.y;
  Vector<Scalar> grad_phi;
  if (want_grad) grad_phi = Vector<Scalar>::Zero(phi.size());

  const Scalar inv_steps = Scalar(1) / Scalar(steps);
  int work = 0;
  for (int pos = 0; pos < steps; ++pos) {
    const Action a = detail::step_action(trace, pos);
    StepForward<Scalar> f = step_forward(p, task, pos, work, phi);
    const Vector<Scalar> logp = log_softmax(f.logits);
    const Vector<Scalar> prob = logp.array().exp().matrix();
    const Scalar h = -(prob.array() * logp.array()).sum();
    out.log_prob += logp[static_cast<int>(a)];
    out.entropy += h * inv_steps;

    if (want_grad) {
      // d log p_a / dz = e_a - p ;  dH/dz = -p (log p + H)
      Vector<Scalar> dz = -w_lp * prob;
      dz[static_cast<int>(a)] += w_lp;
      dz.array() -= (w_ent * inv_steps) * prob.array() * (logp.array() + h);

      out.grad.head.noalias() += dz * f.gated.transpose();
      const Vector<Scalar> d_gated = p.head.transpose() * dz;
      GateGradient<Scalar> gg = gate_inject_backward(f.proj.y, phi, p.budget_embed.gate, d_gated);
      grad_phi += gg.phi;
      out.grad.budget_embed.gate += gg.gate;
      MlpGradient<Scalar> mg = mlp_backward(p.input_proj, f.proj.cache, gg.hidden);
      out.grad.input_proj.weight1 += mg.params.weight1;
      out.grad.input_proj.bias1 += mg.params.bias1;
      out.grad.input_proj.weight2 += mg.params.weight2;
      out.grad.input_proj.bias2 += mg.params.bias2;
    }
    if (a == Action::Work) ++work;
  }
  if (want_grad) {
    MlpParams<Scalar> eg = embed_budget_backward(p.budget_embed, embed.cache, grad_phi);
    out.grad.budget_embed.proj.weight1 = eg.weight1;
    out.grad.budget_embed.proj.bias1 = eg.bias1;
    out.grad.budget_embed.proj.weight2 = eg.weight2;
    out.grad.budget_embed.proj.bias2 = eg.bias2;
  }
  return out;
}

/// Sum of log-probabilities of the policy's own choices; forced transitions contribute 0.
template <typename Scalar>
Scalar log_prob(const PolicyParams<Scalar>& p, const Task& task, int b, const Trace& trace) {
  return score_trace(p, task, b, trace, false).log_prob;
}

template <typename Scalar>
Scalar entropy(const PolicyParams<Scalar>& p, const Task& task, int b, const Trace& trace) {
  return score_trace(p, task, b, trace, false).entropy;
}

struct GenerationConfig {
  int max_think = 1 << 20;
  double temperature = 1.0;
  std::uint64_t rng_seed = 0;
  bool greedy = false;
};

/// Samples think tokens until the policy stops or the budget is spent, then
/// emits exactly one ANSWER token.
Trace generate(const PolicyParams<double>& p, const Task& task, int b, const GenerationConfig& cfg);
Trace generate(const PolicyParams<double>& p, const Task& task, int b, const GenerationConfig& cfg, Rng& rng);

/// One JSON line: task id, budget, tokens (think + ANSWER), logprobs, stopped flag.
void write_trace_jsonl(std::ostream& out, int task_id, int budget, const Trace& trace);
Trace parse_trace_jsonl(const std::string& line, int* task_id = nullptr, int* budget = nullptr);

}  // namespace bacr

#endif  // BACR_POLICY_HPP
