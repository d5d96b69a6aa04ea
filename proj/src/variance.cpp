#include "bacr/variance.hpp"

#include "bacr/parallel.hpp"
#include "bacr/random.hpp"

#include <cmath>
#include <cstdio>

namespace bacr {

namespace {

std::vector<int> bin_budgets(const BudgetRange& range, int levels, int level) {
  std::vector<int> out;
  for (int b = static_cast<int>(std::ceil(range.min)); b <= static_cast<int>(std::floor(range.max)); ++b)
    if (budget_level(b, range.min, range.max, levels) == level) out.push_back(b);
  return out;
}

struct Rollout {
  int budget = 0;
  double reward = 0;
  double value = 0;
  VectorXd grad_logp;
};

}  // namespace

std::vector<VarianceRow> measure_variance(const PolicyParams<double>& policy, const ValueNetParams<double>& value,
                                          const TaskSet& tasks, const TrainConfig& cfg,
                                          const VarianceOptions& opts) {
  if (opts.group_size < 2) throw std::invalid_argument("measure_variance: group size must be >= 2");
  if (opts.repetitions < 2) throw std::invalid_argument("measure_variance: need at least two repetitions");
  const int N = opts.group_size;
  const int M = cfg.effective_truncation_points();
  const double lambda = cfg.effective_lambda();
  const std::size_t n_tasks = tasks.tasks.size();
  const std::size_t n = n_tasks * static_cast<std::size_t>(N);
  const Eigen::Index dim = parameter_count(policy);

  std::vector<VarianceRow> rows;
  for (int level = 0; level < opts.levels; ++level) {
    const std::vector<int> bins = bin_budgets(cfg.range, opts.levels, level);
    if (bins.empty()) continue;
    const int mid = bins[bins.size() / 2];

    std::vector<double> adv_brpo, adv_bcae;
    std::vector<VectorXd> g_brpo, g_bcae;
    for (int rep = 0; rep < opts.repetitions; ++rep) {
      std::vector<Rollout> roll(n);
      parallel_for(n, opts.workers, [&](std::size_t s) {
        const Task& task = tasks.tasks[s / N];
        Rng rng = make_rng(opts.seed, {static_cast<std::uint64_t>(level), static_cast<std::uint64_t>(rep),
                                       static_cast<std::uint64_t>(task.id), s % N});
        std::uniform_int_distribution<std::size_t> pick(0, bins.size() - 1);
        Rollout& r = roll[s];
        r.budget = bins[pick(rng)];
        GenerationConfig gen;
        const Trace t = generate(policy, task, r.budget, gen, rng);
        r.reward = reward_profile(task, t, r.budget, M, lambda).cumulative;
        r.value = value_predict(value, task.features, policy_phi(policy, r.budget));
        r.grad_logp = flatten<double>(score_trace(policy, task, r.budget, t, true).grad);
      });

      VectorXd gb = VectorXd::Zero(dim), gc = VectorXd::Zero(dim);
      for (std::size_t q = 0; q < n_tasks; ++q) {
        std::vector<double> rewards(N);
        for (int g = 0; g < N; ++g) rewards[g] = roll[q * N + g].reward;
        const std::vector<double> a = brpo_advantage(rewards);
        for (int g = 0; g < N; ++g) {
          const Rollout& r = roll[q * N + g];
          const double ac = bcae_advantage(r.reward, r.value);
          adv_brpo.push_back(a[g]);
          adv_bcae.push_back(ac);
          gb += a[g] * r.grad_logp;
          gc += ac * r.grad_logp;
        }
      }
      g_brpo.push_back(gb / static_cast<double>(n));
      g_bcae.push_back(gc / static_cast<double>(n));
    }

    auto summarize = [&](const std::string& mode, const std::vector<double>& adv, const std::vector<VectorXd>& grads) {
      VarianceRow row;
      row.iteration = opts.iteration;
      row.budget = mid;
      row.mode = mode;
      double mean = 0;
      for (double a : adv) mean += a;
      mean /= static_cast<double>(adv.size());
      for (double a : adv) row.per_sample_var += (a - mean) * (a - mean);
      row.per_sample_var /= static_cast<double>(adv.size());
      VectorXd gmean = VectorXd::Zero(dim);
      for (const auto& g : grads) gmean += g;
      gmean /= static_cast<double>(grads.size());
      for (const auto& g : grads) row.grad_var += (g - gmean).squaredNorm();
      row.grad_var /= static_cast<double>(grads.size() - 1);
      rows.push_back(row);
    };
    summarize("brpo", adv_brpo, g_brpo);
    summarize("bcae", adv_bcae, g_bcae);
  }
  return rows;
}

namespace {

std::vector<ValueSample> value_dataset(const PolicyParams<double>& policy, const TaskSet& tasks,
                                       const TrainConfig& cfg, int per_task, std::uint64_t seed, int workers) {
  const int M = cfg.effective_truncation_points();
  const double lambda = cfg.effective_lambda();
  const int lo = static_cast<int>(std::ceil(cfg.range.min)), hi = static_cast<int>(std::floor(cfg.range.max));
  const std::size_t n = tasks.tasks.size() * static_cast<std::size_t>(per_task);
  std::vector<ValueSample> data(n);
  parallel_for(n, workers, [&](std::size_t s) {
    const Task& task = tasks.tasks[s / per_task];
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(task.id), s % per_task});
    const int b = std::uniform_int_distribution<int>(lo, hi)(rng);
    GenerationConfig gen;
    const Trace t = generate(policy, task, b, gen, rng);
    data[s] = {task.features, policy_phi(policy, b), reward_profile(task, t, b, M, lambda).cumulative};
  });
  return data;
}

}  // namespace

ValueFitReport fit_value_on_policy(const PolicyParams<double>& policy, ValueNetParams<double>& value,
                                   const TaskSet& tasks, const TrainConfig& cfg, const ValueFitOptions& opts) {
  const auto data = value_dataset(policy, tasks, cfg, opts.samples_per_task, opts.seed, opts.workers);
  const auto holdout =
      value_dataset(policy, tasks, cfg, opts.samples_per_task, derive_seed(opts.seed, {1}), opts.workers);

  ValueFitReport rep;
  rep.initial_loss = value_loss(value, data, false).loss;
  constexpr double beta1 = 0.9, beta2 = 0.999, tiny = 1e-8;
  VectorXd theta = flatten<double>(value);
  VectorXd m = VectorXd::Zero(theta.size()), v = VectorXd::Zero(theta.size());
  double anchor = rep.initial_loss;
  double loss = anchor;
  while (rep.steps < opts.max_steps) {
    const ValueLoss<double> l = value_loss(value, data, true);
    loss = l.loss;
    const VectorXd g = flatten<double>(l.grad);
    ++rep.steps;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(beta1, rep.steps), c2 = 1 - std::pow(beta2, rep.steps);
    theta.array() -= opts.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + tiny);
    unflatten(value, theta);
    if (rep.steps % opts.window == 0) {
      if (anchor - loss < opts.tolerance) break;
      anchor = loss;
    }
  }
  rep.final_loss = value_loss(value, data, false).loss;
  rep.holdout_loss = value_loss(value, holdout, false).loss;
  return rep;
}

void write_variance_csv(std::ostream& out, const std::vector<VarianceRow>& rows) {
  out << "iteration,budget,mode,per_sample_var,grad_var\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.per_sample_var, r.grad_var);
    out << r.iteration << ',' << r.budget << ',' << r.mode << ',' << buf << '\n';
  }
}

}  // namespace bacr
