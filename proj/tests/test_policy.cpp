#include "bacr/policy.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace bacr;
using bacr::testing::LD;
using bacr::testing::random_task;
using bacr::testing::small_shape;

namespace {

PolicyParams<double> zero_policy(const PolicyShape& shape) {
  Rng rng(0);
  return make_policy(shape, rng).zeros_like();
}

}  // namespace

TEST_CASE("step_logits") {
  Rng rng(41);
  const PolicyShape shape = small_shape();
  const Task task = random_task(rng);

  SUBCASE("zero parameters give a uniform step distribution") {
    const VectorXd pr = softmax(step_logits(zero_policy(shape), task, 3, 40, 1));
    for (int i = 0; i < kNumActions; ++i) CHECK(pr[i] == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("budget conditioning is live and deterministic") {
    auto p = make_policy(shape, rng);
    p.budget_embed.gate = bacr::testing::random_vector<double>(shape.dim, rng);
    const VectorXd a = step_logits(p, task, 2, 16, 1), b = step_logits(p, task, 2, 100, 1);
    CHECK((a - b).cwiseAbs().maxCoeff() > 1e-6);
    CHECK(step_logits(p, task, 2, 16, 1) == a);
  }
  SUBCASE("errors") {
    const auto p = make_policy(shape, rng);
    CHECK_THROWS_AS(step_logits(p, task, -1, 16, 0), std::invalid_argument);
    CHECK_THROWS_AS(step_logits(p, random_task(rng, 7), 0, 16, 0), DimensionError);
  }
}

TEST_CASE("generate respects the budget and replays from its seed") {
  Rng rng(42);
  const PolicyShape shape = small_shape({1, 128});
  const auto p = make_policy(shape, rng);
  const Task task = random_task(rng);

  GenerationConfig cfg;
  const Trace zero = generate(p, task, 0, cfg);
  CHECK(zero.think.empty());
  CHECK(zero.answer == Token::Answer);
  CHECK(zero.token_logprobs == std::vector<double>{0.0});

  for (int i = 0; i < 1000; ++i) {
    cfg.rng_seed = static_cast<std::uint64_t>(i);
    const Trace t = generate(p, task, 3, cfg);
    CHECK(t.budget_used() <= 3);
    CHECK(t.answer == Token::Answer);
    CHECK(t.token_logprobs.size() == t.think.size() + 1);
  }

  cfg.rng_seed = 77;
  const Trace a = generate(p, task, 60, cfg), b = generate(p, task, 60, cfg);
  CHECK(a.think == b.think);
  CHECK(a.token_logprobs == b.token_logprobs);

  cfg.greedy = true;
  cfg.rng_seed = 1;
  const Trace g1 = generate(p, task, 60, cfg);
  cfg.rng_seed = 2;
  CHECK(generate(p, task, 60, cfg).think == g1.think);

  cfg.temperature = 0;
  CHECK_THROWS_AS(generate(p, task, 5, cfg), std::invalid_argument);
}

TEST_CASE("log_prob re-scores stored traces") {
  Rng rng(43);
  const PolicyShape shape = small_shape();
  const Task task = random_task(rng);
  for (int s = 0; s < 20; ++s) {
    const auto p = make_policy(shape, rng);
    GenerationConfig cfg;
    cfg.rng_seed = static_cast<std::uint64_t>(s);
    for (int b : {8, 20, 128}) {
      const Trace t = generate(p, task, b, cfg);
      CHECK(std::abs(log_prob(p, task, b, t) - t.logprob_sum()) < 1e-10);
    }
  }
}

TEST_CASE("uniform policy closed forms") {
  Rng rng(44);
  const auto p = zero_policy(small_shape());
  const Task task = random_task(rng);
  const Trace forced = truncate(bacr::testing::make_trace({Token::Work, Token::Filler, Token::Work}), 3);
  CHECK(log_prob(p, task, 3 + 8, forced) == doctest::Approx(-3 * std::log(4.0)));  // 3 tokens, not stopped
  Trace stopped = forced;
  stopped.stopped = true;
  CHECK(log_prob(p, task, 20, stopped) == doctest::Approx(-4 * std::log(4.0)));  // 3 tokens + stop
  CHECK(entropy(p, task, 20, stopped) == doctest::Approx(std::log(4.0)));

  const Trace empty = generate(p, task, 0, {});
  CHECK(log_prob(p, task, 0, empty) == 0.0);
  CHECK(entropy(p, task, 0, empty) == 0.0);
}

TEST_CASE("entropy bounds") {
  Rng rng(45);
  const PolicyShape shape = small_shape();
  const Task task = random_task(rng);
  for (int s = 0; s < 20; ++s) {
    const auto p = make_policy(shape, rng);
    GenerationConfig cfg;
    cfg.rng_seed = static_cast<std::uint64_t>(s);
    const Trace t = generate(p, task, 30, cfg);
    const double h = entropy(p, task, 30, t);
    CHECK(h >= 0);
    CHECK(h <= std::log(4.0) + 1e-12);
  }
  // A near-deterministic head collapses the entropy.
  auto p = zero_policy(shape);
  p.input_proj.bias2.setConstant(1.0);
  p.head.row(static_cast<int>(Action::Work)).setConstant(100.0);
  const Trace t = generate(p, task, 10, {});
  CHECK(t.think.size() == 10);
  CHECK(entropy(p, task, 10, t) < 1e-100);
}

TEST_CASE("scoring rejects traces that break the budget") {
  Rng rng(46);
  const auto p = make_policy(small_shape(), rng);
  const Task task = random_task(rng);
  Trace t = bacr::testing::make_trace({Token::Work, Token::Work, Token::Work});
  CHECK_THROWS_AS(log_prob(p, task, 2, t), std::invalid_argument);
  t.stopped = true;
  CHECK_THROWS_AS(log_prob(p, task, 3, t), std::invalid_argument);
  CHECK_NOTHROW(log_prob(p, task, 8, t));
  Trace bad = bacr::testing::make_trace({Token::Work, Token::Answer});
  CHECK_THROWS_AS(log_prob(p, task, 8, bad), std::invalid_argument);
}

TEST_CASE("enumerated trace probabilities sum to one at budget 2") {
  for (int s = 0; s < 10; ++s) {
    Rng rng = make_rng(47, {static_cast<std::uint64_t>(s)});
    auto p = make_policy(small_shape({1, 8}), rng);
    p.budget_embed.gate = bacr::testing::random_vector<double>(4, rng);
    const Task task = random_task(rng);
    double total = 0;
    int count = 0;
    bacr::testing::enumerate_traces<double>(p, task, 2, [&](const Trace&, double pr) {
      total += pr;
      ++count;
    });
    CHECK(count == 1 + 3 * (1 + 3));  // stop now, or one token then stop or one more token
    CHECK(std::abs(total - 1) < 1e-10);
  }
}

TEST_CASE("log_prob and entropy gradients match central differences over 20 seeds") {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(48, {static_cast<std::uint64_t>(seed)});
    auto pd = make_policy(small_shape(), rng);
    pd.budget_embed.gate = bacr::testing::random_vector<double>(4, rng, 0.5);
    const PolicyParams<LD> p = pd.cast<LD>();
    const Task task = random_task(rng);
    GenerationConfig cfg;
    cfg.rng_seed = static_cast<std::uint64_t>(seed);
    const int b = 9 + seed;
    const Trace t = generate(pd, task, b, cfg);
    const LD w_lp = 0.7L, w_ent = -0.3L;
    const auto sc = score_trace(p, task, b, t, true, w_lp, w_ent);
    auto f = [&](const Vector<LD>& flat) {
      PolicyParams<LD> q = p;
      unflatten(q, flat);
      const auto s = score_trace(q, task, b, t, false);
      return w_lp * s.log_prob + w_ent * s.entropy;
    };
    CHECK(grad_check(f, flatten<LD>(p), flatten<LD>(sc.grad), 1e-6L) < 1e-5L);
  }
}

TEST_CASE("with a zeroed budget embedding the step distribution ignores b") {
  Rng rng(49);
  auto p = make_policy(small_shape(), rng);
  zero_budget_embedding(p);
  const Task task = random_task(rng);
  for (int pos = 0; pos < 5; ++pos)
    for (int b : {9, 40, 127}) CHECK(step_logits(p, task, pos, b, pos / 2) == step_logits(p, task, pos, 8, pos / 2));

  // Sampling streams coincide until the shorter budget cuts the trace.
  GenerationConfig cfg;
  cfg.rng_seed = 5;
  const Trace shortt = generate(p, task, 10, cfg), longt = generate(p, task, 100, cfg);
  const std::size_t n = shortt.think.size();
  CHECK(std::equal(shortt.think.begin(), shortt.think.end(), longt.think.begin()));
  CHECK(longt.think.size() >= n);
}

TEST_CASE("trace JSON lines round trip") {
  Rng rng(50);
  const auto p = make_policy(small_shape(), rng);
  const Task task = random_task(rng);
  GenerationConfig cfg;
  cfg.rng_seed = 3;
  const Trace t = generate(p, task, 40, cfg);
  std::ostringstream out;
  write_trace_jsonl(out, 17, 40, t);
  int id = 0, budget = 0;
  const Trace back = parse_trace_jsonl(out.str(), &id, &budget);
  CHECK(id == 17);
  CHECK(budget == 40);
  CHECK(back.think == t.think);
  CHECK(back.answer == t.answer);
  CHECK(back.stopped == t.stopped);
  CHECK(back.token_logprobs == t.token_logprobs);
  CHECK(std::abs(log_prob(p, task, budget, back) - back.logprob_sum()) < 1e-10);
}
