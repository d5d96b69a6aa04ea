#include "bacr/rewards.hpp"

#include <stdexcept>
#include <string>

namespace bacr {

std::vector<int> truncation_points(int b, int m) {
  if (m < 1) throw std::invalid_argument("truncation_points: M must be >= 1");
  if (b < m)
    throw std::invalid_argument("truncation_points: budget " + std::to_string(b) + " smaller than M = " +
                                std::to_string(m));
  std::vector<int> pts(m);
  for (int j = 1; j <= m; ++j) pts[j - 1] = static_cast<int>((static_cast<long long>(j) * b) / m);
  return pts;
}

double progress_reward(int r_curr, std::optional<int> r_prev, int j) {
  if (j < 1) throw std::invalid_argument("progress_reward: j must be >= 1");
  if (j == 1) {
    if (r_prev) throw std::invalid_argument("progress_reward: no previous outcome exists at j = 1");
    return r_curr;
  }
  if (!r_prev) throw std::invalid_argument("progress_reward: previous outcome required for j > 1");
  return static_cast<double>(r_curr - *r_prev);
}

RewardProfile reward_profile(const Task& task, const Trace& trace, int b, int m, double lambda,
                             const Verifier& verifier) {
  if (lambda < 0) throw std::invalid_argument("reward_profile: lambda must be >= 0");
  if (trace.budget_used() > b) throw std::invalid_argument("reward_profile: trace longer than its budget");
  if (!trace.answer) throw std::invalid_argument("reward_profile: trace has no answer transition");
  RewardProfile rp;
  rp.budgets = truncation_points(b, m);
  rp.outcomes.reserve(m);
  rp.progress.reserve(m);
  rp.dense.reserve(m);
  double total = 0;
  for (int j = 1; j <= m; ++j) {
    const int r = verifier(task, truncate(trace, rp.budgets[j - 1]));
    const double dr = progress_reward(r, j > 1 ? std::optional<int>(rp.outcomes.back()) : std::nullopt, j);
    rp.outcomes.push_back(r);
    rp.progress.push_back(dr);
    rp.dense.push_back(dense_reward(r, dr, lambda));
    total += rp.dense.back();
  }
  rp.cumulative = total / m;
  return rp;
}

}  // namespace bacr
