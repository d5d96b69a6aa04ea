#ifndef BACR_ENVIRONMENT_HPP
#define BACR_ENVIRONMENT_HPP

#include "bacr/numerics.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bacr {

enum class Token : std::uint8_t { Work = 0, Error = 1, Filler = 2, Answer = 3 };

std::string token_name(Token t);
Token token_from_name(const std::string& name);

struct Task {
  int id = 0;
  int group = 1;  // 1..K
  int required_steps = 1;
  VectorXd features;
};

/// Think segment plus the answer transition. `token_logprobs` has one entry per
/// think token and, when an answer is present, one for the transition into it:
/// log p(stop) if the policy chose to stop, 0 if the budget forced it.
struct Trace {
  std::vector<Token> think;
  std::optional<Token> answer;
  std::vector<double> token_logprobs;
  bool stopped = false;

  int budget_used() const { return static_cast<int>(think.size()); }
  int work_count() const;
  double logprob_sum() const;
};

struct TaskSetSpec {
  int groups = 4;
  int tasks_per_group = 8;
  std::vector<int> step_requirements{2, 6, 14, 30};
  std::uint64_t seed = 1;
  double noise_std = 0.01;
};

struct TaskSet {
  std::vector<Task> tasks;
  std::map<int, std::vector<int>> group_index;  // group -> task ids

  int groups() const { return static_cast<int>(group_index.size()); }
  int feature_dim() const { return tasks.empty() ? 0 : static_cast<int>(tasks.front().features.size()); }
  int max_required_steps() const;
  const Task& by_id(int id) const;
};

TaskSet make_taskset(const TaskSetSpec& spec);

/// Prefix t_{:b}: keeps the first min(len, b) think tokens. A cut trace gets
/// the forced answer transition; b >= len returns the trace unchanged.
Trace truncate(const Trace& trace, int b);

/// 1 iff the prefix holds at least `required_steps` WORK tokens, no ERROR, and an answer.
int verify(const Task& task, const Trace& prefix);

nlohmann::json taskset_to_json(const TaskSet& set);
TaskSet taskset_from_json(const nlohmann::json& j);
void save_taskset(const TaskSet& set, const std::string& path);
TaskSet load_taskset(const std::string& path);

}  // namespace bacr

#endif  // BACR_ENVIRONMENT_HPP
