#include "bacr/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace bacr {

std::string estimator_name(EstimatorMode m) {
  switch (m) {
    case EstimatorMode::GroupMean: return "grpo";
    case EstimatorMode::BudgetGroupMean: return "brpo";
    case EstimatorMode::ValueBaseline: return "bcae";
  }
  throw std::invalid_argument("estimator_name: bad mode");
}

EstimatorMode estimator_from_name(const std::string& name) {
  if (name == "grpo") return EstimatorMode::GroupMean;
  if (name == "brpo") return EstimatorMode::BudgetGroupMean;
  if (name == "bcae") return EstimatorMode::ValueBaseline;
  throw std::invalid_argument("unknown estimator '" + name + "' (expected grpo, brpo or bcae)");
}

ValueNetParams<double> make_value_net(Eigen::Index feature_dim, Eigen::Index embed_dim, Eigen::Index hidden,
                                      Rng& rng) {
  return {make_mlp<double>(feature_dim + embed_dim, hidden, 1, Activation::SiLU, rng)};
}

std::vector<double> fit_value(ValueNetParams<double>& psi, const std::vector<ValueSample>& data, int steps,
                              double learning_rate) {
  std::vector<double> history;
  history.reserve(steps);
  for (int s = 0; s < steps; ++s) {
    ValueLoss<double> l = value_loss(psi, data);
    history.push_back(l.loss);
    add_scaled(psi, l.grad, -learning_rate);
  }
  return history;
}

std::vector<double> brpo_advantage(const std::vector<double>& rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("brpo_advantage: group needs at least two rewards");
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - mean;
  return out;
}

double population_std(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n);
}

std::vector<double> normalize(const std::vector<double>& advantages, double eps) {
  if (advantages.empty()) throw std::invalid_argument("normalize: empty batch");
  if (!(eps > 0)) throw std::invalid_argument("normalize: epsilon must be positive");
  const double scale = std::max(population_std(advantages), eps);
  std::vector<double> out(advantages.size());
  for (std::size_t i = 0; i < advantages.size(); ++i) out[i] = advantages[i] / scale;
  return out;
}

int budget_level(int budget, double b_min, double b_max, int levels) {
  if (levels < 1) throw std::invalid_argument("budget_level: need at least one level");
  const double t = (budget - b_min) / (b_max - b_min);
  return std::clamp(static_cast<int>(std::floor(t * levels)), 0, levels - 1);
}

std::vector<std::vector<int>> budget_level_groups(const std::vector<int>& budgets, double b_min, double b_max,
                                                  int levels) {
  std::map<int, std::vector<int>> bins;
  for (int i = 0; i < static_cast<int>(budgets.size()); ++i)
    bins[budget_level(budgets[i], b_min, b_max, levels)].push_back(i);

  std::vector<std::vector<int>> groups;
  std::vector<int> pooled;
  for (auto& [level, members] : bins) {
    if (members.size() >= 2) {
      groups.push_back(std::move(members));
    } else {
      pooled.insert(pooled.end(), members.begin(), members.end());
    }
  }
  if (pooled.size() >= 2 || (groups.empty() && !pooled.empty())) {
    groups.push_back(std::move(pooled));
  } else if (pooled.size() == 1) {
    auto largest = std::max_element(groups.begin(), groups.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    largest->push_back(pooled.front());
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return groups;
}

}  // namespace bacr
