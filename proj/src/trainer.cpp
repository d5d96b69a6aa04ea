#include "bacr/trainer.hpp"

#include "bacr/parallel.hpp"
#include "bacr/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bacr {

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw std::invalid_argument(key + ": " + what);
}

int uniform_int(int lo, int hi, Rng& rng) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

// Pass rate measured at b_max, the budget at which difficulty is defined.
std::vector<GroupResult> curriculum_feedback(const TrainerState& state, const TaskSet& tasks,
                                             const TrainConfig& cfg, std::uint64_t salt) {
  return measure_pass_rates(state.policy, tasks, static_cast<int>(cfg.range.max), cfg.pass_rate_rollouts,
                            derive_seed(cfg.seed, {salt}), cfg.workers);
}

}  // namespace

EstimatorMode TrainConfig::estimator() const {
  if (fixed_budget) return EstimatorMode::GroupMean;
  return flags.bcae ? EstimatorMode::ValueBaseline : EstimatorMode::BudgetGroupMean;
}

CurriculumParams TrainConfig::curriculum_params() const {
  CurriculumParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.eta = eta;
  p.sigma_fraction = sigma_fraction;
  p.range = range;
  return p;
}

PolicyShape TrainConfig::policy_shape() const {
  PolicyShape s;
  s.feature_dim = taskset.groups + 1;
  s.hidden = hidden;
  s.dim = embed_dim;
  s.pos_dim = pos_dim;
  s.work_scale = taskset.step_requirements.empty() ? 1.0 : taskset.step_requirements.back();
  s.range = range;
  return s;
}

void TrainConfig::validate() const {
  require(alpha > 0 && alpha < 1, "alpha", "must lie in (0, 1)");
  require(beta > 0 && beta < 1, "beta", "must lie in (0, 1)");
  require(lambda >= 0, "lambda", "must be >= 0");
  require(eps_clip > 0 && eps_clip < 1, "eps_clip", "must lie in (0, 1)");
  require(c_v >= 0, "c_v", "must be >= 0");
  require(c_h >= 0, "c_h", "must be >= 0");
  require(eta > 0 && eta <= 1, "eta", "must lie in (0, 1]");
  require(sigma_fraction > 0, "sigma_fraction", "must be positive");
  require(mu0 >= 0, "mu0", "must be >= 0 (0 selects the range midpoint)");
  require(adv_eps > 0, "adv_eps", "must be positive");
  require(group_size >= 2, "group_size", "must be >= 2");
  require(truncation_points >= 1, "truncation_points", "must be >= 1");
  require(range.min > 0 && range.min < range.max, "b_min", "need 0 < b_min < b_max");
  require(range.min >= truncation_points, "b_min", "must be >= truncation_points");
  require(budget_levels >= 1, "budget_levels", "must be >= 1");
  require(pass_rate_rollouts >= 1, "pass_rate_rollouts", "must be >= 1");
  require(taskset.groups >= 1, "groups", "must be >= 1");
  require(taskset.noise_std >= 0, "feature_noise", "must be >= 0");
  require(taskset.tasks_per_group >= 1, "tasks_per_group", "must be >= 1");
  require(static_cast<int>(taskset.step_requirements.size()) == taskset.groups, "step_requirements",
          "needs one entry per group");
  for (std::size_t k = 0; k < taskset.step_requirements.size(); ++k) {
    require(taskset.step_requirements[k] >= 1, "step_requirements", "entries must be >= 1");
    if (k > 0)
      require(taskset.step_requirements[k] > taskset.step_requirements[k - 1], "step_requirements",
              "must be strictly increasing");
  }
  require(epochs >= 0, "epochs", "must be >= 0");
  require(iters_per_epoch >= 1, "iters_per_epoch", "must be >= 1");
  require(minibatch >= 1, "minibatch", "must be >= 1");
  require(ppo_epochs >= 1, "ppo_epochs", "must be >= 1");
  require(learning_rate > 0, "learning_rate", "must be positive");
  require(max_grad_norm >= 0, "max_grad_norm", "must be >= 0 (0 disables clipping)");
  require(hidden >= 1, "hidden", "must be >= 1");
  require(embed_dim >= 2 && embed_dim % 2 == 0, "embed_dim", "must be even and >= 2");
  require(pos_dim >= 2 && pos_dim % 2 == 0, "pos_dim", "must be even and >= 2");
  require(value_hidden >= 1, "value_hidden", "must be >= 1");
  require(!eval_grid.empty(), "eval_grid", "must not be empty");
  for (int b : eval_grid) require(b == 0 || range.contains(b), "eval_grid", "budgets must be 0 or inside [b_min, b_max]");
  require(eval_samples >= 1, "eval_samples", "must be >= 1");
  require(eval_every >= 0, "eval_every", "must be >= 0");
  require(workers >= 1, "workers", "must be >= 1");
}

std::vector<EvalRow> evaluate_anytime(const PolicyParams<double>& policy, const TaskSet& tasks,
                                      const std::vector<int>& grid, const EvalOptions& opts) {
  const int samples = opts.greedy ? 1 : std::max(1, opts.samples);
  const std::size_t n = tasks.tasks.size() * static_cast<std::size_t>(samples);
  std::vector<EvalRow> rows;
  for (int b : grid) {
    std::vector<int> correct(n), used(n);
    parallel_for(n, opts.workers, [&](std::size_t idx) {
      const Task& task = tasks.tasks[idx / samples];
      GenerationConfig gen;
      gen.greedy = opts.greedy;
      gen.rng_seed = derive_seed(opts.seed, {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(task.id),
                                             static_cast<std::uint64_t>(idx % samples)});
      const Trace t = generate(policy, task, b, gen);
      correct[idx] = verify(task, t);
      used[idx] = t.budget_used();
    });
    EvalRow row;
    row.budget = b;
    row.accuracy = n ? std::accumulate(correct.begin(), correct.end(), 0.0) / static_cast<double>(n) : 0.0;
    row.mean_tokens = n ? std::accumulate(used.begin(), used.end(), 0.0) / static_cast<double>(n) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<GroupResult> measure_pass_rates(const PolicyParams<double>& policy, const TaskSet& tasks, int budget,
                                            int rollouts, std::uint64_t seed, int workers) {
  const std::size_t n = tasks.tasks.size() * static_cast<std::size_t>(rollouts);
  std::vector<int> outcome(n);
  parallel_for(n, workers, [&](std::size_t idx) {
    const Task& task = tasks.tasks[idx / rollouts];
    GenerationConfig gen;
    gen.rng_seed = derive_seed(seed, {static_cast<std::uint64_t>(task.id), static_cast<std::uint64_t>(idx % rollouts)});
    outcome[idx] = verify(task, generate(policy, task, budget, gen));
  });
  std::vector<GroupResult> results(tasks.groups());
  for (std::size_t idx = 0; idx < n; ++idx) {
    auto& r = results[tasks.tasks[idx / rollouts].group - 1];
    r.attempts += 1;
    r.successes += outcome[idx];
  }
  return results;
}

TrainerState init_trainer(const TrainConfig& cfg, const TaskSet& tasks) {
  cfg.validate();
  if (tasks.groups() != cfg.taskset.groups) throw std::invalid_argument("init_trainer: task set group count differs from config");
  TrainerState state;
  PolicyShape shape = cfg.policy_shape();
  shape.feature_dim = tasks.feature_dim();
  shape.work_scale = tasks.max_required_steps();
  Rng prng = make_rng(cfg.seed, {1});
  state.policy = make_policy(shape, prng);
  if (!cfg.flags.bup) zero_budget_embedding(state.policy);
  Rng vrng = make_rng(cfg.seed, {2});
  state.value = make_value_net(tasks.feature_dim(), cfg.embed_dim, cfg.value_hidden, vrng);

  const int k = tasks.groups();
  const CurriculumParams cp = cfg.curriculum_params();
  if (cfg.flags.cas && !cfg.fixed_budget) {
    // rho_k(0): G sampled rollouts per task at b_max before training.
    const auto r0 = measure_pass_rates(state.policy, tasks, static_cast<int>(cfg.range.max), cfg.group_size,
                                       derive_seed(cfg.seed, {3}), cfg.workers);
    std::vector<double> rho0(k);
    for (int g = 0; g < k; ++g)
      rho0[g] = r0[g].attempts ? static_cast<double>(r0[g].successes) / static_cast<double>(r0[g].attempts) : 0.0;
    state.curriculum = init_curriculum(rho0, std::vector<double>(k, cfg.base_mu()), cp);
  } else {
    // Static prior: logged means stay constant for the whole run.
    CurriculumState s;
    s.pass_rates.assign(k, 0.0);
    s.mu0.assign(k, cfg.fixed_budget ? cfg.range.max : 0.5 * (cfg.range.min + cfg.range.max));
    s.mu = s.mu0;
    s.sigma.assign(k, cp.sigma());
    s.weights.assign(k, 1.0 / k);
    state.curriculum = s;
  }
  return state;
}

MinibatchResult run_minibatch(const TrainerState& state, const TaskSet& tasks, const TrainConfig& cfg) {
  const int B = cfg.minibatch;
  const int G = cfg.group_size;
  const int M = cfg.effective_truncation_points();
  const double lambda = cfg.effective_lambda();
  const auto iter = static_cast<std::uint64_t>(state.iteration);
  const int k_groups = tasks.groups();
  const bool curriculum_on = cfg.flags.cas && !cfg.fixed_budget;

  // Questions: group by curriculum weight (or uniformly), then uniform within the group.
  Rng select = make_rng(cfg.seed, {iter, 11});
  const std::vector<double> uniform(k_groups, 1.0 / k_groups);
  std::vector<const Task*> batch_tasks(B);
  for (int i = 0; i < B; ++i) {
    const int k = sample_index(curriculum_on ? state.curriculum.weights : uniform, select);
    const auto& members = tasks.group_index.at(k + 1);
    batch_tasks[i] = &tasks.by_id(members[uniform_int(0, static_cast<int>(members.size()) - 1, select)]);
  }

  const int b_lo = static_cast<int>(std::ceil(cfg.range.min));
  const int b_hi = static_cast<int>(std::floor(cfg.range.max));
  std::vector<int> budgets(static_cast<std::size_t>(B) * G);
  for (int i = 0; i < B; ++i) {
    const int k = batch_tasks[i]->group - 1;
    for (int g = 0; g < G; ++g) {
      Rng rb = make_rng(cfg.seed, {iter, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(g), 12});
      int b = b_hi;
      if (!cfg.fixed_budget) {
        b = curriculum_on ? sample_budget(state.curriculum.mu[k], state.curriculum.sigma[k], cfg.range, rb)
                          : uniform_int(b_lo, b_hi, rb);
      }
      budgets[static_cast<std::size_t>(i) * G + g] = b;
    }
  }

  // Rollouts and reward profiles, one slot per (question, g).
  const std::size_t n = budgets.size();
  std::vector<Trace> traces(n);
  std::vector<RewardProfile> profiles(n);
  std::vector<char> ok(n, 0);
  parallel_for(n, cfg.workers, [&](std::size_t s) {
    const int i = static_cast<int>(s) / G, g = static_cast<int>(s) % G;
    try {
      GenerationConfig gen;
      gen.rng_seed = derive_seed(cfg.seed, {iter, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(g), 13});
      traces[s] = generate(state.policy, *batch_tasks[i], budgets[s], gen);
      profiles[s] = reward_profile(*batch_tasks[i], traces[s], budgets[s], M, lambda);
      ok[s] = 1;
    } catch (const std::exception&) {
      ok[s] = 0;  // skipped; counted in metrics
    }
  });

  MinibatchResult out;
  IterationMetrics& m = out.metrics;
  m.iteration = state.iteration;
  m.epoch = state.epoch;
  out.group_results.assign(k_groups, GroupResult{});

  // Advantages per question.
  std::vector<double> raw(n, 0.0), normed(n, 0.0);
  std::vector<VectorXd> phis(n);
  const EstimatorMode mode = cfg.estimator();
  for (int i = 0; i < B; ++i) {
    std::vector<int> slots;
    for (int g = 0; g < G; ++g)
      if (ok[static_cast<std::size_t>(i) * G + g]) slots.push_back(i * G + g);
    for (int s : slots) phis[s] = policy_phi(state.policy, budgets[s]);
    if (slots.empty()) continue;

    std::vector<std::vector<int>> groups;  // indices into `slots`
    if (mode == EstimatorMode::BudgetGroupMean) {
      std::vector<int> bs;
      for (int s : slots) bs.push_back(budgets[s]);
      groups = budget_level_groups(bs, cfg.range.min, cfg.range.max, cfg.budget_levels);
    } else {
      groups.emplace_back(slots.size());
      std::iota(groups.back().begin(), groups.back().end(), 0);
    }

    for (const auto& grp : groups) {
      std::vector<double> rewards, adv;
      for (int idx : grp) rewards.push_back(profiles[slots[idx]].cumulative);
      if (mode == EstimatorMode::ValueBaseline) {
        for (int idx : grp) {
          const int s = slots[idx];
          adv.push_back(bcae_advantage(profiles[s].cumulative,
                                       value_predict(state.value, batch_tasks[i]->features, phis[s])));
        }
      } else if (rewards.size() >= 2) {
        adv = brpo_advantage(rewards);
      } else {
        adv.assign(rewards.size(), 0.0);  // lone survivor of skipped rollouts: no baseline
      }
      const std::vector<double> nrm = normalize(adv, cfg.adv_eps);
      double group_sum = 0;
      std::vector<int> members;
      for (std::size_t t = 0; t < grp.size(); ++t) {
        const int s = slots[grp[t]];
        raw[s] = adv[t];
        normed[s] = nrm[t];
        group_sum += adv[t];
        members.push_back(s);
      }
      m.max_group_adv_mean = std::max(m.max_group_adv_mean, std::abs(group_sum / static_cast<double>(grp.size())));
      out.baseline_groups.push_back(std::move(members));
    }
  }

  // Loss entries and metrics, in slot order.
  double adv_sum = 0, adv_sq = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (!ok[s]) {
      ++m.skipped;
      continue;
    }
    const int i = static_cast<int>(s) / G;
    const Task& task = *batch_tasks[i];
    const RewardProfile& rp = profiles[s];
    LossEntry e;
    e.task = &task;
    e.budget = budgets[s];
    e.trace = traces[s];
    e.logprob_old = traces[s].logprob_sum();
    e.advantage = normed[s];
    e.reward = rp.cumulative;
    e.value_phi = phis[s];
    out.entries.push_back(std::move(e));
    out.raw_advantages.push_back(raw[s]);

    m.mean_reward += rp.cumulative;
    m.mean_outcome += rp.outcomes.back();
    m.progress_contrib += lambda * std::accumulate(rp.progress.begin(), rp.progress.end(), 0.0) / M;
    m.mean_budget += budgets[s];
    m.tokens_used += traces[s].budget_used();
    adv_sum += raw[s];
    adv_sq += raw[s] * raw[s];
    auto& gr = out.group_results[task.group - 1];
    gr.attempts += 1;
    gr.successes += rp.outcomes.back();
    for (int j = 0; j < M; ++j) {
      out.rewards.push_back({state.iteration, static_cast<int>(s), task.id, budgets[s], j + 1, rp.budgets[j],
                             rp.outcomes[j], rp.progress[j], rp.dense[j]});
    }
  }
  const double cnt = static_cast<double>(out.entries.size());
  if (out.entries.empty()) throw std::runtime_error("run_minibatch: every rollout failed");
  m.mean_reward /= cnt;
  m.mean_outcome /= cnt;
  m.progress_contrib /= cnt;
  m.mean_budget /= cnt;
  m.tokens_used /= cnt;
  m.adv_mean = adv_sum / cnt;
  m.adv_var = std::max(0.0, adv_sq / cnt - m.adv_mean * m.adv_mean);

  ObjectiveResult<double> obj =
      minibatch_objective(state.policy, state.value, out.entries, cfg.loss_weights(), true, cfg.workers);
  m.policy_loss = obj.policy_loss;
  m.value_loss = obj.value_loss;
  m.entropy = obj.entropy;
  m.total_loss = obj.total;
  m.clip_fraction = obj.clip_fraction;
  out.policy_grad = std::move(obj.policy_grad);
  out.value_grad = std::move(obj.value_grad);
  return out;
}

double apply_update(TrainerState& state, const PolicyParams<double>& policy_grad,
                    const ValueNetParams<double>& value_grad, const TrainConfig& cfg) {
  PolicyParams<double> pg = policy_grad;
  if (!cfg.flags.bup) pg.budget_embed = pg.budget_embed.zeros_like();
  VectorXd gp = flatten<double>(pg);
  VectorXd gv = flatten<double>(value_grad);
  const double norm = std::sqrt(gp.squaredNorm() + gv.squaredNorm());
  double scale = cfg.learning_rate;
  if (cfg.max_grad_norm > 0 && norm > cfg.max_grad_norm) scale *= cfg.max_grad_norm / norm;
  VectorXd p = flatten<double>(state.policy);
  p -= scale * gp;
  unflatten(state.policy, p);
  VectorXd v = flatten<double>(state.value);
  v -= scale * gv;
  unflatten(state.value, v);
  return norm;
}

TrainResult train(const TrainConfig& cfg, const TaskSet& tasks, const TrainOptions& opts) {
  TrainerState state = init_trainer(cfg, tasks);
  TrainResult result;
  result.curriculum.push_back({0, state.curriculum});

  EvalOptions eval;
  eval.greedy = cfg.eval_greedy;
  eval.samples = cfg.eval_samples;
  eval.workers = cfg.workers;
  auto evaluate_at = [&](int epoch) {
    eval.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), 31});
    result.evals.push_back({epoch, evaluate_anytime(state.policy, tasks, cfg.eval_grid, eval)});
  };
  if (opts.evaluate) evaluate_at(0);

  for (int e = 1; e <= cfg.epochs; ++e) {
    state.epoch = e;
    for (int it = 0; it < cfg.iters_per_epoch; ++it) {
      MinibatchResult mb = run_minibatch(state, tasks, cfg);
      IterationMetrics& m = mb.metrics;
      if (!std::isfinite(m.total_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << e << ", iteration " << state.iteration;
        result.diverged = true;
        result.diagnostic = msg.str();
        break;
      }
      const TrainerState before = state;
      m.grad_norm = apply_update(state, mb.policy_grad, mb.value_grad, cfg);
      for (int pe = 1; pe < cfg.ppo_epochs; ++pe) {
        ObjectiveResult<double> obj =
            minibatch_objective(state.policy, state.value, mb.entries, cfg.loss_weights(), true, cfg.workers);
        apply_update(state, obj.policy_grad, obj.value_grad, cfg);
      }
      if (!all_finite(state.policy) || !all_finite(state.value)) {
        state = before;
        result.diverged = true;
        result.diagnostic = "non-finite parameters after update at iteration " + std::to_string(state.iteration);
        break;
      }
      result.history.push_back(m);
      if (opts.record_rewards) result.rewards.insert(result.rewards.end(), mb.rewards.begin(), mb.rewards.end());
      ++state.iteration;
    }
    if (result.diverged) break;

    if (cfg.flags.cas && !cfg.fixed_budget) {
      state.curriculum = update_pass_rates(state.curriculum, curriculum_feedback(state, tasks, cfg, 1000 + e),
                                           cfg.curriculum_params());
    } else {
      state.curriculum.epoch = e;
    }
    result.curriculum.push_back({e, state.curriculum});
    if (opts.evaluate && (e == cfg.epochs || (cfg.eval_every > 0 && e % cfg.eval_every == 0))) evaluate_at(e);
  }
  result.policy = state.policy;
  result.value = state.value;
  return result;
}

}  // namespace bacr
