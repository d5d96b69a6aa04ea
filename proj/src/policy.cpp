#include "bacr/policy.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace bacr {

PolicyParams<double> make_policy(const PolicyShape& shape, Rng& rng) {
  if (shape.pos_dim % 2 != 0) throw std::invalid_argument("make_policy: pos_dim must be even");
  PolicyParams<double> p;
  p.input_proj = make_mlp<double>(shape.input_dim(), shape.hidden, shape.dim, Activation::SiLU, rng);
  p.head = MatrixXd::Zero(kNumActions, shape.dim);
  xavier_uniform(p.head, rng);
  p.budget_embed = make_budget_embed(shape.dim, shape.range, rng);
  p.pos_dim = shape.pos_dim;
  p.work_scale = shape.work_scale;
  return p;
}

Trace generate(const PolicyParams<double>& p, const Task& task, int b, const GenerationConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return generate(p, task, b, cfg, rng);
}

Trace generate(const PolicyParams<double>& p, const Task& task, int b, const GenerationConfig& cfg, Rng& rng) {
  if (b < 0) throw std::invalid_argument("generate: negative budget");
  if (!(cfg.temperature > 0)) throw std::invalid_argument("generate: temperature must be positive");
  const int limit = std::min(b, cfg.max_think);
  Trace trace;
  if (limit > 0) {
    const VectorXd phi = policy_phi(p, b);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int work = 0;
    for (int pos = 0; pos < limit; ++pos) {
      const VectorXd logits = step_forward(p, task, pos, work, phi).logits;
      const VectorXd logp = log_softmax(logits);
      Eigen::Index choice = 0;
      if (cfg.greedy) {
        logits.maxCoeff(&choice);
      } else {
        const VectorXd q = softmax((logits / cfg.temperature).eval());
        const double u = unif(rng);
        double acc = 0;
        choice = q.size() - 1;
        for (Eigen::Index i = 0; i < q.size(); ++i) {
          acc += q[i];
          if (u < acc) {
            choice = i;
            break;
          }
        }
      }
      const auto a = static_cast<Action>(choice);
      trace.token_logprobs.push_back(logp[choice]);
      if (a == Action::Stop) {
        trace.stopped = true;
        break;
      }
      trace.think.push_back(action_token(a));
      if (a == Action::Work) ++work;
    }
  }
  if (!trace.stopped) trace.token_logprobs.push_back(0.0);  // forced transition
  trace.answer = Token::Answer;
  return trace;
}

void write_trace_jsonl(std::ostream& out, int task_id, int budget, const Trace& trace) {
  nlohmann::json tokens = nlohmann::json::array();
  for (Token t : trace.think) tokens.push_back(token_name(t));
  if (trace.answer) tokens.push_back(token_name(*trace.answer));
  nlohmann::json j = {{"task_id", task_id},
                      {"budget", budget},
                      {"tokens", tokens},
                      {"logprobs", trace.token_logprobs},
                      {"stopped", trace.stopped}};
  out << j.dump() << '\n';
}

Trace parse_trace_jsonl(const std::string& line, int* task_id, int* budget) {
  const auto j = nlohmann::json::parse(line);
  Trace t;
  for (const auto& name : j.at("tokens")) {
    const Token tok = token_from_name(name.get<std::string>());
    if (tok == Token::Answer) {
      t.answer = tok;
    } else {
      if (t.answer) throw std::invalid_argument("parse_trace_jsonl: think token after ANSWER");
      t.think.push_back(tok);
    }
  }
  t.token_logprobs = j.at("logprobs").get<std::vector<double>>();
  t.stopped = j.at("stopped").get<bool>();
  if (task_id) *task_id = j.at("task_id").get<int>();
  if (budget) *budget = j.at("budget").get<int>();
  return t;
}

}  // namespace bacr
