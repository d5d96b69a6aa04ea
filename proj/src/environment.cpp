#include "bacr/environment.hpp"

#include "bacr/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace bacr {

std::string token_name(Token t) {
  switch (t) {
    case Token::Work: return "WORK";
    case Token::Error: return "ERROR";
    case Token::Filler: return "FILLER";
    case Token::Answer: return "ANSWER";
  }
  throw std::invalid_argument("token_name: bad token");
}

Token token_from_name(const std::string& name) {
  if (name == "WORK") return Token::Work;
  if (name == "ERROR") return Token::Error;
  if (name == "FILLER") return Token::Filler;
  if (name == "ANSWER") return Token::Answer;
  throw std::invalid_argument("unknown token '" + name + "'");
}

int Trace::work_count() const {
  return static_cast<int>(std::count(think.begin(), think.end(), Token::Work));
}

double Trace::logprob_sum() const {
  return std::accumulate(token_logprobs.begin(), token_logprobs.end(), 0.0);
}

int TaskSet::max_required_steps() const {
  int m = 0;
  for (const auto& t : tasks) m = std::max(m, t.required_steps);
  return m;
}

const Task& TaskSet::by_id(int id) const {
  if (id >= 0 && id < static_cast<int>(tasks.size()) && tasks[id].id == id) return tasks[id];
  for (const auto& t : tasks)
    if (t.id == id) return t;
  throw std::out_of_range("TaskSet: no task with id " + std::to_string(id));
}

TaskSet make_taskset(const TaskSetSpec& spec) {
  if (spec.groups < 1) throw std::invalid_argument("make_taskset: need at least one group");
  if (spec.tasks_per_group < 1) throw std::invalid_argument("make_taskset: need at least one task per group");
  if (static_cast<int>(spec.step_requirements.size()) != spec.groups)
    throw std::invalid_argument("make_taskset: one step requirement per group expected");
  for (int k = 0; k < spec.groups; ++k) {
    if (spec.step_requirements[k] < 1) throw std::invalid_argument("make_taskset: step requirements must be >= 1");
    if (k > 0 && spec.step_requirements[k] <= spec.step_requirements[k - 1])
      throw std::invalid_argument("make_taskset: step requirements must be strictly increasing");
  }

  if (!(spec.noise_std >= 0)) throw std::invalid_argument("make_taskset: feature noise must be >= 0");
  const double s_max = spec.step_requirements.back();
  Rng rng = make_rng(spec.seed, {0x7a5c});
  std::normal_distribution<double> noise(0.0, spec.noise_std > 0 ? spec.noise_std : 1.0);

  TaskSet set;
  int next_id = 0;
  for (int k = 0; k < spec.groups; ++k) {
    for (int n = 0; n < spec.tasks_per_group; ++n) {
      Task t;
      t.id = next_id++;
      t.group = k + 1;
      t.required_steps = spec.step_requirements[k];
      t.features = VectorXd::Zero(spec.groups + 1);
      t.features[k] = 1.0;
      t.features[spec.groups] = t.required_steps / s_max;
      if (spec.noise_std > 0)
        for (Eigen::Index i = 0; i < t.features.size(); ++i) t.features[i] += noise(rng);
      set.group_index[t.group].push_back(t.id);
      set.tasks.push_back(std::move(t));
    }
  }
  return set;
}

Trace truncate(const Trace& trace, int b) {
  if (b < 0) throw std::invalid_argument("truncate: negative budget");
  if (b >= trace.budget_used()) return trace;
  Trace out;
  out.think.assign(trace.think.begin(), trace.think.begin() + b);
  out.answer = Token::Answer;
  if (!trace.token_logprobs.empty()) {  // traces built by hand may carry no log-probs
    if (trace.token_logprobs.size() < static_cast<std::size_t>(b))
      throw std::invalid_argument("truncate: fewer log-probs than think tokens");
    out.token_logprobs.assign(trace.token_logprobs.begin(), trace.token_logprobs.begin() + b);
    out.token_logprobs.push_back(0.0);
  }
  out.stopped = false;
  return out;
}

int verify(const Task& task, const Trace& prefix) {
  if (!prefix.answer) return 0;
  int work = 0;
  for (Token t : prefix.think) {
    if (t == Token::Error) return 0;
    if (t == Token::Work) ++work;
  }
  return work >= task.required_steps ? 1 : 0;
}

nlohmann::json taskset_to_json(const TaskSet& set) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : set.tasks) {
    tasks.push_back({{"id", t.id},
                     {"group", t.group},
                     {"required_steps", t.required_steps},
                     {"feature_vec", std::vector<double>(t.features.data(), t.features.data() + t.features.size())}});
  }
  return {{"tasks", tasks}};
}

TaskSet taskset_from_json(const nlohmann::json& j) {
  TaskSet set;
  for (const auto& jt : j.at("tasks")) {
    Task t;
    t.id = jt.at("id").get<int>();
    t.group = jt.at("group").get<int>();
    t.required_steps = jt.at("required_steps").get<int>();
    const auto fv = jt.at("feature_vec").get<std::vector<double>>();
    t.features = Eigen::Map<const VectorXd>(fv.data(), static_cast<Eigen::Index>(fv.size()));
    if (t.required_steps < 1 || t.group < 1 || !t.features.allFinite())
      throw std::invalid_argument("taskset_from_json: invalid task " + std::to_string(t.id));
    set.group_index[t.group].push_back(t.id);
    set.tasks.push_back(std::move(t));
  }
  return set;
}

void save_taskset(const TaskSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << taskset_to_json(set).dump(2) << '\n';
}

TaskSet load_taskset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return taskset_from_json(nlohmann::json::parse(in));
}

}  // namespace bacr
