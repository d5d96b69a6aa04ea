#ifndef BACR_TRAINER_HPP
#define BACR_TRAINER_HPP

#include "bacr/advantage.hpp"
#include "bacr/curriculum.hpp"
#include "bacr/environment.hpp"
#include "bacr/objective.hpp"
#include "bacr/policy.hpp"
#include "bacr/rewards.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bacr {

/// Component switches of the ablation grid.
struct ModeFlags {
  bool bup = true;   // budget-conditioned policy (off: phi(b) held at zero)
  bool cas = true;   // curriculum scheduler (off: uniform budgets and groups)
  bool tdr = true;   // progress term in the dense reward (off: lambda = 0)
  bool bcae = true;  // value baseline (off: per-budget-level group mean)

  bool operator==(const ModeFlags&) const = default;
};

struct TrainConfig {
  // Objective and curriculum coefficients.
  double alpha = 0.6;
  double beta = 0.3;
  double lambda = 0.3;
  double eps_clip = 0.2;
  double c_v = 0.5;
  double c_h = 0.01;
  double eta = 0.1;
  double sigma_fraction = 0.15;
  double mu0 = 0;  // base budget mean; 0 selects the midpoint of the range
  double adv_eps = 1e-6;

  // Sampling.
  int group_size = 8;         // G
  int truncation_points = 4;  // M
  BudgetRange range{8, 128};
  int budget_levels = 3;  // BRPO budget bins
  int pass_rate_rollouts = 4;

  // Task set.
  TaskSetSpec taskset;

  // Optimization.
  int epochs = 40;
  int iters_per_epoch = 5;
  int minibatch = 8;
  int ppo_epochs = 1;
  double learning_rate = 0.01;
  double max_grad_norm = 1.0;

  // Model sizes.
  int hidden = 32;
  int embed_dim = 16;
  int pos_dim = 8;
  int value_hidden = 16;

  // Evaluation.
  std::vector<int> eval_grid{8, 16, 32, 64, 128};
  int eval_samples = 32;
  bool eval_greedy = false;
  int eval_every = 10;  // epochs between intermediate evaluations; 0 = final only

  ModeFlags flags;
  bool fixed_budget = false;  // GRPO: every rollout at b_max, outcome reward only
  std::uint64_t seed = 1;
  int workers = 1;

  EstimatorMode estimator() const;
  double effective_lambda() const { return flags.tdr && !fixed_budget ? lambda : 0.0; }
  int effective_truncation_points() const { return fixed_budget ? 1 : truncation_points; }
  double base_mu() const { return mu0 > 0 ? mu0 : 0.5 * (range.min + range.max); }
  int total_iterations() const { return epochs * iters_per_epoch; }
  CurriculumParams curriculum_params() const;
  PolicyShape policy_shape() const;
  LossWeights loss_weights() const { return {eps_clip, c_v, c_h}; }

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
};

struct IterationMetrics {
  int epoch = 0;
  int iteration = 0;
  double mean_reward = 0;   // mean cumulative dense reward
  double mean_outcome = 0;  // mean full-budget verifier outcome
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double total_loss = 0;
  double adv_mean = 0;
  double adv_var = 0;
  double max_group_adv_mean = 0;  // max |mean raw advantage| over baseline groups
  double progress_contrib = 0;    // mean lambda/M * sum of progress rewards
  double mean_budget = 0;
  double tokens_used = 0;
  double grad_norm = 0;
  double clip_fraction = 0;
  int skipped = 0;
};

struct RewardRow {
  int iteration = 0;
  int trace_id = 0;
  int task_id = 0;
  int budget = 0;
  int j = 0;
  int point = 0;
  int outcome = 0;
  double progress = 0;
  double dense = 0;
};

struct EvalRow {
  int budget = 0;
  double accuracy = 0;
  double mean_tokens = 0;
};

struct EvalSnapshot {
  int epoch = 0;
  std::vector<EvalRow> rows;
};

struct CurriculumSnapshot {
  int epoch = 0;
  CurriculumState state;
};

struct EvalOptions {
  bool greedy = true;
  int samples = 1;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Mean verifier accuracy and think length at each grid budget.
std::vector<EvalRow> evaluate_anytime(const PolicyParams<double>& policy, const TaskSet& tasks,
                                      const std::vector<int>& grid, const EvalOptions& opts);

/// Per-group (successes, attempts) from `rollouts` sampled traces per task at `budget`.
std::vector<GroupResult> measure_pass_rates(const PolicyParams<double>& policy, const TaskSet& tasks, int budget,
                                            int rollouts, std::uint64_t seed, int workers);

/// Mutable training state threaded through minibatches.
struct TrainerState {
  PolicyParams<double> policy;
  ValueNetParams<double> value;
  CurriculumState curriculum;
  int iteration = 0;
  int epoch = 0;
};

TrainerState init_trainer(const TrainConfig& cfg, const TaskSet& tasks);

struct MinibatchResult {
  PolicyParams<double> policy_grad;
  ValueNetParams<double> value_grad;
  IterationMetrics metrics;
  std::vector<RewardRow> rewards;
  std::vector<GroupResult> group_results;  // full-budget outcomes by group
  std::vector<LossEntry> entries;
  std::vector<double> raw_advantages;
  std::vector<std::vector<int>> baseline_groups;
};

/// Samples questions and budgets, generates G rollouts each, profiles rewards,
/// computes advantages and returns the gradient of the total loss at the
/// current parameters. Deterministic given (cfg.seed, state.iteration).
MinibatchResult run_minibatch(const TrainerState& state, const TaskSet& tasks, const TrainConfig& cfg);

/// Clip by global norm and take one descent step. Returns the pre-clip norm.
double apply_update(TrainerState& state, const PolicyParams<double>& policy_grad,
                    const ValueNetParams<double>& value_grad, const TrainConfig& cfg);

struct TrainResult {
  PolicyParams<double> policy;
  ValueNetParams<double> value;
  std::vector<IterationMetrics> history;
  std::vector<CurriculumSnapshot> curriculum;
  std::vector<EvalSnapshot> evals;
  std::vector<RewardRow> rewards;
  bool diverged = false;
  std::string diagnostic;  // set when training halted on a non-finite loss or parameter
};

struct TrainOptions {
  bool record_rewards = true;
  bool evaluate = true;  // epoch-0, every cfg.eval_every epochs, and final
};

/// Runs cfg.epochs epochs. On divergence the loop halts and returns the last
/// finite parameters with `diverged` set.
TrainResult train(const TrainConfig& cfg, const TaskSet& tasks, const TrainOptions& opts = {});

}  // namespace bacr

#endif  // BACR_TRAINER_HPP
