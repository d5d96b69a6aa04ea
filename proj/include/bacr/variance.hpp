#ifndef BACR_VARIANCE_HPP
#define BACR_VARIANCE_HPP

#include "bacr/trainer.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace bacr {

struct VarianceOptions {
  int group_size = 8;    // N rollouts per (task, level)
  int repetitions = 20;  // resampled minibatches per level
  int levels = 3;        // equal-width budget bins
  std::uint64_t seed = 0;
  int workers = 1;
  int iteration = 0;  // training iteration of the frozen policy, copied into the report
};

struct VarianceRow {
  int iteration = 0;
  int budget = 0;  // midpoint of the budget bin
  std::string mode;
  double per_sample_var = 0;  // variance of raw advantages pooled over repetitions
  double grad_var = 0;        // trace of the covariance of the minibatch gradient estimate
};

/// For each budget bin and repetition, draws N budgets per task uniformly in the
/// bin, generates traces, and forms the minibatch policy-gradient estimate
/// (1/n) sum A_i grad log pi(t_i) with BRPO (group mean) and BCAE (value head)
/// advantages on the same traces. Policy and value head stay frozen.
std::vector<VarianceRow> measure_variance(const PolicyParams<double>& policy, const ValueNetParams<double>& value,
                                          const TaskSet& tasks, const TrainConfig& cfg,
                                          const VarianceOptions& opts);

struct ValueFitOptions {
  int samples_per_task = 128;  // (budget, trace) pairs per task, budgets uniform over the range
  int max_steps = 5000;
  double learning_rate = 0.01;  // Adam step size
  double tolerance = 1e-5;      // stop when the loss improves by less than this over `window` steps
  int window = 250;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct ValueFitReport {
  int steps = 0;
  double initial_loss = 0;
  double final_loss = 0;
  double holdout_loss = 0;  // on an independent sample of the same size
};

/// Regresses the value head on dense rewards of traces from the frozen policy
/// with full-batch Adam.
ValueFitReport fit_value_on_policy(const PolicyParams<double>& policy, ValueNetParams<double>& value,
                                   const TaskSet& tasks, const TrainConfig& cfg, const ValueFitOptions& opts);

void write_variance_csv(std::ostream& out, const std::vector<VarianceRow>& rows);

}  // namespace bacr

#endif  // BACR_VARIANCE_HPP
