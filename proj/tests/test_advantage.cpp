#include "bacr/advantage.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace bacr;
using bacr::testing::LD;

namespace {

std::vector<ValueSample> random_samples(Rng& rng, int n, double target_or_nan = std::nan("")) {
  std::normal_distribution<double> d(0, 1);
  std::vector<ValueSample> out;
  for (int i = 0; i < n; ++i) {
    ValueSample s;
    s.features = testing::random_vector<double>(5, rng);
    s.phi = testing::random_vector<double>(4, rng);
    s.target = std::isnan(target_or_nan) ? d(rng) : target_or_nan;
    out.push_back(s);
  }
  return out;
}

double mean(const std::vector<double>& xs) { return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size()); }

}  // namespace

TEST_CASE("value_predict") {
  Rng rng(70);
  auto psi = make_value_net(5, 4, 8, rng);
  const VectorXd f = testing::random_vector<double>(5, rng), phi = testing::random_vector<double>(4, rng);
  CHECK(value_predict(psi.zeros_like(), f, phi) == 0);
  CHECK(value_predict(psi, f, phi) == value_predict(psi, f, phi));
  CHECK_THROWS_AS(value_predict(psi, f, VectorXd(VectorXd::Zero(3))), DimensionError);
}

TEST_CASE("value_loss") {
  Rng rng(71);
  auto psi = make_value_net(5, 4, 8, rng).zeros_like();
  std::vector<ValueSample> one{{VectorXd::Zero(5), VectorXd::Zero(4), 1.0}};
  CHECK(value_loss(psi, one).loss == 1);
  std::vector<ValueSample> two{{VectorXd::Zero(5), VectorXd::Zero(4), -1.0}, {VectorXd::Zero(5), VectorXd::Zero(4), 1.0}};
  CHECK(value_loss(psi, two).loss == 1);
  std::vector<ValueSample> exact{{VectorXd::Zero(5), VectorXd::Zero(4), 0.0}};
  CHECK(value_loss(psi, exact).loss == 0);
  CHECK_THROWS_AS(value_loss(psi, {}), std::invalid_argument);
}

TEST_CASE("value_loss gradient matches central differences over 20 seeds") {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(72, {static_cast<std::uint64_t>(seed)});
    const ValueNetParams<LD> psi = make_value_net(5, 4, 7, rng).cast<LD>();
    const auto data = random_samples(rng, 6);
    const auto analytic = value_loss(psi, data);
    auto f = [&](const Vector<LD>& flat) {
      ValueNetParams<LD> q = psi;
      unflatten(q, flat);
      return value_loss(q, data, false).loss;
    };
    CHECK(grad_check(f, flatten<LD>(psi), flatten<LD>(analytic.grad), 1e-6L) < 1e-5L);
  }
}

TEST_CASE("fitting a constant target") {
  Rng rng(73);
  auto psi = make_value_net(5, 4, 8, rng);
  const auto data = random_samples(rng, 128, 0.7);
  fit_value(psi, data, 8000, 0.05);
  for (const auto& s : data) CHECK(std::abs(value_predict(psi, s.features, s.phi) - 0.7) < 0.01);
  for (const auto& s : random_samples(rng, 20, 0.7))
    CHECK(std::abs(value_predict(psi, s.features, s.phi) - 0.7) < 0.01);
}

TEST_CASE("full-batch small-step fitting decreases the loss monotonically") {
  Rng rng(74);
  auto psi = make_value_net(5, 4, 8, rng);
  const auto data = random_samples(rng, 32);
  const auto history = fit_value(psi, data, 500, 0.01);
  for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1]);
  CHECK(history.back() < history.front());
}

TEST_CASE("brpo_advantage") {
  CHECK(brpo_advantage({1, 0, 0, 1}) == std::vector<double>{0.5, -0.5, -0.5, 0.5});
  CHECK(brpo_advantage({0.3, 0.3, 0.3}) == std::vector<double>{0, 0, 0});
  CHECK_THROWS_AS(brpo_advantage({1}), std::invalid_argument);
  CHECK_THROWS_AS(brpo_advantage({}), std::invalid_argument);
  Rng rng(75);
  std::uniform_real_distribution<double> u(-1, 1.3);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> r(8);
    for (double& x : r) x = u(rng);
    const auto a = brpo_advantage(r);
    CHECK(std::abs(std::accumulate(a.begin(), a.end(), 0.0)) < 1e-14);
  }
}

TEST_CASE("bcae_advantage") {
  CHECK(bcae_advantage(1, 0.6) == doctest::Approx(0.4));
  CHECK(bcae_advantage(0.25, 0.25) == 0);
  Rng rng(76);
  const double p = 0.3;
  std::bernoulli_distribution coin(p);
  const int n = 10000;
  std::vector<double> a(n);
  for (double& x : a) x = bcae_advantage(coin(rng) ? 1.0 : 0.0, p);
  CHECK(std::abs(mean(a)) < 3 * std::sqrt(p * (1 - p)) / std::sqrt(double(n)));
}

TEST_CASE("BRPO per-sample variance on Bernoulli rewards") {
  Rng rng(77);
  std::bernoulli_distribution coin(0.5);
  const int groups = 100000, n = 8;
  double s1 = 0, s2 = 0;
  std::vector<double> r(n);
  for (int g = 0; g < groups; ++g) {
    for (double& x : r) x = coin(rng) ? 1.0 : 0.0;
    double m2 = 0;
    for (double a : brpo_advantage(r)) m2 += a * a;
    m2 /= n;
    s1 += m2;
    s2 += m2 * m2;
  }
  const double est = s1 / groups;
  const double se = std::sqrt((s2 / groups - est * est) / groups);
  CHECK(std::abs(est - 0.21875) < 3 * se);
}

TEST_CASE("normalize") {
  CHECK(normalize({0.5, -0.5}) == std::vector<double>{1, -1});
  const auto flat = normalize({0.2, 0.2, 0.2}, 1e-6);
  for (double x : flat) CHECK(x == doctest::Approx(0.2 / 1e-6));
  CHECK_THROWS_AS(normalize({}), std::invalid_argument);
  CHECK_THROWS_AS(normalize({1, 2}, 0), std::invalid_argument);

  Rng rng(78);
  std::normal_distribution<double> d(0.3, 2.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(2 + i % 15);
    for (double& x : a) x = d(rng);
    const auto z = normalize(a);
    CHECK(std::abs(population_std(z) - 1) < 1e-9);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK((z[k] > 0) == (a[k] > 0));
    CHECK(std::max_element(z.begin(), z.end()) - z.begin() == std::max_element(a.begin(), a.end()) - a.begin());
    std::vector<double> scaled(a);
    for (double& x : scaled) x *= 3.7;
    const auto zs = normalize(scaled);
    const auto twice = normalize(z);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(zs[k] == doctest::Approx(z[k]).epsilon(1e-12));
      CHECK(twice[k] == doctest::Approx(z[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("budget levels and groups") {
  CHECK(budget_level(8, 8, 128, 3) == 0);
  CHECK(budget_level(47, 8, 128, 3) == 0);
  CHECK(budget_level(48, 8, 128, 3) == 1);
  CHECK(budget_level(128, 8, 128, 3) == 2);
  CHECK_THROWS_AS(budget_level(8, 8, 128, 0), std::invalid_argument);

  using G = std::vector<std::vector<int>>;
  CHECK(budget_level_groups({10, 12, 100, 110}, 8, 128, 3) == G{{0, 1}, {2, 3}});
  // Singleton bins pool together.
  CHECK(budget_level_groups({10, 60, 100, 110}, 8, 128, 3) == G{{2, 3}, {0, 1}});
  // A lone leftover joins the largest group.
  CHECK(budget_level_groups({10, 12, 14, 100}, 8, 128, 3) == G{{0, 1, 2, 3}});
  CHECK(budget_level_groups({50}, 8, 128, 3) == G{{0}});

  Rng rng(79);
  std::uniform_int_distribution<int> b(8, 128), n(2, 12);
  for (int i = 0; i < 500; ++i) {
    std::vector<int> budgets(static_cast<std::size_t>(n(rng)));
    for (int& x : budgets) x = b(rng);
    std::vector<int> seen;
    for (const auto& g : budget_level_groups(budgets, 8, 128, 3)) {
      CHECK(g.size() >= 2);
      seen.insert(seen.end(), g.begin(), g.end());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<int> all(budgets.size());
    std::iota(all.begin(), all.end(), 0);
    CHECK(seen == all);
  }
}

TEST_CASE("estimator names") {
  for (auto m : {EstimatorMode::GroupMean, EstimatorMode::BudgetGroupMean, EstimatorMode::ValueBaseline})
    CHECK(estimator_from_name(estimator_name(m)) == m);
  CHECK_THROWS_AS(estimator_from_name("ppo"), std::invalid_argument);
}
