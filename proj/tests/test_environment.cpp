#include "bacr/environment.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>

using namespace bacr;
using bacr::testing::make_trace;

namespace {
constexpr Token W = Token::Work, E = Token::Error, F = Token::Filler;
}

TEST_CASE("make_taskset builds the requested buckets") {
  TaskSetSpec one{1, 1, {3}, 5, 0.01};
  const TaskSet single = make_taskset(one);
  CHECK(single.tasks.size() == 1);
  CHECK(single.groups() == 1);

  TaskSetSpec spec{4, 3, {2, 4, 8, 16}, 9, 0.01};
  const TaskSet set = make_taskset(spec);
  CHECK(set.tasks.size() == 12);
  CHECK(set.groups() == 4);
  CHECK(set.max_required_steps() == 16);
  CHECK(set.feature_dim() == 5);
  for (int k = 1; k <= 4; ++k) {
    CHECK(set.group_index.at(k).size() == 3);
    for (int id : set.group_index.at(k)) {
      const Task& t = set.by_id(id);
      CHECK(t.group == k);
      CHECK(t.required_steps == spec.step_requirements[k - 1]);
      // one-hot plus normalized requirement, perturbed by small noise
      for (int i = 0; i < 4; ++i) CHECK(std::abs(t.features[i] - (i == k - 1 ? 1.0 : 0.0)) < 0.1);
      CHECK(std::abs(t.features[4] - t.required_steps / 16.0) < 0.1);
    }
  }
  // every task sits in exactly one bucket
  std::vector<int> seen(set.tasks.size(), 0);
  for (const auto& [k, ids] : set.group_index)
    for (int id : ids) ++seen[id];
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("make_taskset is deterministic and validates its spec") {
  const TaskSetSpec spec;
  const TaskSet a = make_taskset(spec), b = make_taskset(spec);
  REQUIRE(a.tasks.size() == b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) CHECK(a.tasks[i].features == b.tasks[i].features);
  TaskSetSpec other = spec;
  other.seed = 2;
  CHECK(make_taskset(other).tasks[0].features != a.tasks[0].features);

  CHECK_THROWS_AS(make_taskset({3, 2, {2, 2, 4}, 1, 0.01}), std::invalid_argument);
  CHECK_THROWS_AS(make_taskset({3, 2, {4, 2, 8}, 1, 0.01}), std::invalid_argument);
  CHECK_THROWS_AS(make_taskset({2, 2, {1}, 1, 0.01}), std::invalid_argument);
  CHECK_THROWS_AS(make_taskset({0, 2, {}, 1, 0.01}), std::invalid_argument);
  CHECK_NOTHROW(make_taskset({1, 2, {1}, 1, 0.0}));
}

TEST_CASE("truncate") {
  Trace t = make_trace({W, F, W, E, W, W});
  t.token_logprobs = {-1, -2, -3, -4, -5, -6, -0.5};
  t.stopped = true;

  const Trace empty = truncate(t, 0);
  CHECK(empty.think.empty());
  CHECK(empty.answer == Token::Answer);
  CHECK(empty.token_logprobs == std::vector<double>{0.0});
  CHECK_FALSE(empty.stopped);

  CHECK(truncate(t, 6).think == t.think);
  CHECK(truncate(t, 100).token_logprobs == t.token_logprobs);
  CHECK(truncate(t, 100).stopped);

  const Trace half = truncate(t, 3);
  CHECK(half.think.size() == 3);
  CHECK(half.token_logprobs == std::vector<double>{-1, -2, -3, 0});

  for (int b = 0; b <= 8; ++b) {
    const Trace once = truncate(t, b), twice = truncate(once, b);
    CHECK(once.think == twice.think);
    CHECK(once.token_logprobs == twice.token_logprobs);
  }
  CHECK_THROWS_AS(truncate(t, -1), std::invalid_argument);
}

TEST_CASE("verify hand cases") {
  Task two;
  two.required_steps = 2;
  CHECK(verify(two, make_trace({W, W})) == 1);
  CHECK(verify(two, make_trace({W, F})) == 0);
  CHECK(verify(two, make_trace({W, W}, false)) == 0);
  Task one;
  one.required_steps = 1;
  CHECK(verify(one, make_trace({W, E, W})) == 0);
  CHECK(verify(one, make_trace({F, F, W})) == 1);
}

TEST_CASE("verify over prefixes: monotone without ERROR, zero after an ERROR") {
  Task task;
  task.required_steps = 3;
  Rng rng(31);
  for (int n = 0; n < 300; ++n) {
    Trace t;
    const int len = std::uniform_int_distribution<int>(1, 30)(rng);
    const std::vector<Token> alphabet = n % 2 == 1 ? std::vector<Token>{W, F, E} : std::vector<Token>{W, F};
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (int i = 0; i < len; ++i) t.think.push_back(alphabet[pick(rng)]);
    t.answer = Token::Answer;
    int prev = 0;
    int first_error = -1;
    for (int i = 0; i < len; ++i)
      if (t.think[i] == E) {
        first_error = i;
        break;
      }
    for (int b = 0; b <= len; ++b) {
      const int r = verify(task, truncate(t, b));
      if (first_error < 0) {
        CHECK(r >= prev);
      } else if (b > first_error) {
        CHECK(r == 0);
      }
      prev = r;
    }
  }
}

TEST_CASE("verify ignores tokens past the prefix") {
  Task task;
  task.required_steps = 2;
  const Trace good = make_trace({W, W, E, E});
  CHECK(verify(task, truncate(good, 2)) == 1);
  CHECK(verify(task, good) == 0);
}

TEST_CASE("taskset JSON round trip") {
  const TaskSet set = make_taskset({});
  const TaskSet back = taskset_from_json(taskset_to_json(set));
  REQUIRE(back.tasks.size() == set.tasks.size());
  for (std::size_t i = 0; i < set.tasks.size(); ++i) {
    CHECK(back.tasks[i].id == set.tasks[i].id);
    CHECK(back.tasks[i].group == set.tasks[i].group);
    CHECK(back.tasks[i].required_steps == set.tasks[i].required_steps);
    CHECK(back.tasks[i].features == set.tasks[i].features);
  }
  CHECK(back.group_index == set.group_index);

  const auto path = std::filesystem::temp_directory_path() / "bacr_taskset_test.json";
  save_taskset(set, path.string());
  CHECK(load_taskset(path.string()).tasks.size() == set.tasks.size());
  std::filesystem::remove(path);
}

TEST_CASE("token names") {
  for (Token t : {W, E, F, Token::Answer}) CHECK(token_from_name(token_name(t)) == t);
  CHECK_THROWS_AS(token_from_name("NOPE"), std::invalid_argument);
}
