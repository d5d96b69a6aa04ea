#ifndef BACR_REWARDS_HPP
#define BACR_REWARDS_HPP

#include "bacr/environment.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace bacr {

/// Outcome, progress and dense rewards at each truncation point of one trace.
struct RewardProfile {
  std::vector<int> budgets;  // strictly ascending, last == sampled budget
  std::vector<int> outcomes;
  std::vector<double> progress;
  std::vector<double> dense;
  double cumulative = 0;
};

using Verifier = std::function<int(const Task&, const Trace&)>;

/// floor(j b / M) for j = 1..M. Requires b >= M >= 1.
std::vector<int> truncation_points(int b, int m);

/// r_curr - r_prev, or r_curr at the first truncation point.
double progress_reward(int r_curr, std::optional<int> r_prev, int j);

inline double dense_reward(double outcome, double progress, double lambda) { return outcome + lambda * progress; }

RewardProfile reward_profile(const Task& task, const Trace& trace, int b, int m, double lambda,
                             const Verifier& verifier = verify);

}  // namespace bacr

#endif  // BACR_REWARDS_HPP
