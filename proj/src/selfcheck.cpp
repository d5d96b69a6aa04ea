#include "bacr/selfcheck.hpp"

#include "bacr/objective.hpp"
#include "bacr/random.hpp"
#include "bacr/rewards.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace bacr {

namespace {

using LD = long double;

struct Reporter {
  std::ostream& out;
  bool all = true;
  void report(const std::string& name, bool ok, const std::string& detail) {
    all = all && ok;
    out << (ok ? "ok   " : "FAIL ") << name << "  " << detail << '\n';
  }
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

Task random_task(Rng& rng, int feature_dim) {
  Task t;
  t.id = 0;
  t.group = 1;
  t.required_steps = 2;
  t.features = VectorXd::NullaryExpr(feature_dim, [&] { return std::normal_distribution<double>(0, 1)(rng); });
  return t;
}

}  // namespace

bool run_self_checks(std::ostream& out, std::uint64_t seed, int instances) {
  Reporter rep{out};
  const LD eps = 1e-6L;
  PolicyShape shape;
  shape.feature_dim = 5;
  shape.hidden = 6;
  shape.dim = 4;
  shape.pos_dim = 4;
  shape.work_scale = 4;

  double worst_mlp = 0, worst_lp = 0, worst_obj = 0;
  for (int i = 0; i < instances; ++i) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});

    // Scalar loss through one MLP.
    const MlpParams<LD> mlp = make_mlp<double>(3, 5, 2, Activation::SiLU, rng).cast<LD>();
    const Vector<LD> x = Vector<LD>::Random(3);
    const Vector<LD> gy = Vector<LD>::Random(2);
    const MlpGradient<LD> g = mlp_backward(mlp, mlp_forward(mlp, x).cache, gy);
    auto f_mlp = [&](const Vector<LD>& flat) {
      MlpParams<LD> q = mlp;
      unflatten(q, flat);
      return static_cast<LD>(gy.dot(mlp_forward(q, x).y));
    };
    worst_mlp = std::max(worst_mlp, static_cast<double>(grad_check(f_mlp, flatten<LD>(mlp), flatten<LD>(g.params), eps)));

    // Trace log-probability through policy, gate and budget embedding.
    const PolicyParams<LD> pol = make_policy(shape, rng).cast<LD>();
    const Task task = random_task(rng, 5);
    GenerationConfig gen;
    gen.rng_seed = derive_seed(seed, {static_cast<std::uint64_t>(i), 1});
    const int b = 12;
    const Trace tr = generate(pol.cast<double>(), task, b, gen);
    const auto sc = score_trace(pol, task, b, tr, true);
    auto f_lp = [&](const Vector<LD>& flat) {
      PolicyParams<LD> q = pol;
      unflatten(q, flat);
      return log_prob(q, task, b, tr);
    };
    worst_lp = std::max(worst_lp, static_cast<double>(grad_check(f_lp, flatten<LD>(pol), flatten<LD>(sc.grad), eps)));

    // Full clipped objective with value and entropy terms.
    const ValueNetParams<LD> val = make_value_net(5, shape.dim, 3, rng).cast<LD>();
    std::vector<LossEntry> batch(3);
    const Trace tr2 = generate(pol.cast<double>(), task, 20, gen);
    for (int k = 0; k < 3; ++k) {
      LossEntry& e = batch[k];
      e.task = &task;
      e.budget = k == 1 ? 20 : b;
      e.trace = k == 1 ? tr2 : tr;
      e.logprob_old = static_cast<double>(log_prob(pol, task, e.budget, e.trace)) + 0.05 * (k - 1);
      e.advantage = k == 2 ? -0.7 : 1.1;
      e.reward = 0.3 * k;
      e.value_phi = embed_budget(pol.budget_embed.cast<double>(), static_cast<double>(e.budget));
    }
    const LossWeights w{0.2, 0.5, 0.01};
    const auto obj = minibatch_objective(pol, val, batch, w, true);
    Vector<LD> analytic(flatten<LD>(obj.policy_grad).size() + flatten<LD>(obj.value_grad).size());
    analytic << flatten<LD>(obj.policy_grad), flatten<LD>(obj.value_grad);
    Vector<LD> p0(analytic.size());
    p0 << flatten<LD>(pol), flatten<LD>(val);
    const Eigen::Index np = flatten<LD>(pol).size();
    auto f_obj = [&](const Vector<LD>& flat) {
      PolicyParams<LD> q = pol;
      ValueNetParams<LD> v = val;
      unflatten(q, flat.head(np));
      unflatten(v, flat.tail(flat.size() - np));
      return minibatch_objective(q, v, batch, w, false).total;
    };
    worst_obj = std::max(worst_obj, static_cast<double>(grad_check(f_obj, p0, analytic, eps)));
  }
  rep.report("mlp gradient", worst_mlp < 1e-5, "max rel err " + num(worst_mlp));
  rep.report("trace log-prob gradient", worst_lp < 1e-5, "max rel err " + num(worst_lp));
  rep.report("total loss gradient", worst_obj < 1e-5, "max rel err " + num(worst_obj));

  // Exhaustive trace enumeration at budget 2 sums to probability 1.
  {
    Rng rng = make_rng(seed, {99});
    PolicyShape s2 = shape;
    s2.range = {1, 8};
    const PolicyParams<double> pol = make_policy(s2, rng);
    const Task task = random_task(rng, 5);
    const int b = 2;
    double total = 0;
    const std::vector<Token> think_tokens{Token::Work, Token::Error, Token::Filler};
    std::function<void(Trace)> walk = [&](Trace t) {
      Trace stopped = t;
      if (t.budget_used() < b) {
        stopped.stopped = true;
        stopped.answer = Token::Answer;
        total += std::exp(log_prob(pol, task, b, stopped));
        for (Token tok : think_tokens) {
          Trace next = t;
          next.think.push_back(tok);
          walk(next);
        }
      } else {
        stopped.answer = Token::Answer;
        total += std::exp(log_prob(pol, task, b, stopped));
      }
    };
    walk(Trace{});
    rep.report("trace probabilities sum to one", std::abs(total - 1) < 1e-10, "sum - 1 = " + num(total - 1));
  }

  // Telescoping progress rewards on random traces.
  {
    Rng rng = make_rng(seed, {100});
    Task task;
    task.required_steps = 3;
    bool ok = true;
    for (int n = 0; n < 500 && ok; ++n) {
      Trace t;
      const int len = std::uniform_int_distribution<int>(4, 40)(rng);
      for (int k = 0; k < len; ++k) t.think.push_back(static_cast<Token>(std::uniform_int_distribution<int>(0, 2)(rng)));
      t.answer = Token::Answer;
      const int m = std::uniform_int_distribution<int>(1, 4)(rng);
      const RewardProfile p = reward_profile(task, t, len, m, 0.3);
      double s = 0;
      for (double d : p.progress) s += d;
      ok = s == p.outcomes.back();
    }
    rep.report("progress rewards telescope", ok, "500 random traces");
  }
  return rep.all;
}

}  // namespace bacr
