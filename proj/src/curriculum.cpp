#include "bacr/curriculum.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bacr {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

// Upper tail Q(z) = P(Z > z).
double normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

// z with Q(z) = p, p in (0, 1).
double normal_isf(double p) { return kSqrt2 * boost::math::erfc_inv(2.0 * p); }

int round_into(double x, const BudgetRange& range) {
  const long lo = static_cast<long>(std::ceil(range.min));
  const long hi = static_cast<long>(std::floor(range.max));
  return static_cast<int>(std::clamp(std::lround(x), lo, hi));
}

double inverse_cdf_draw(double mu, double sigma, const BudgetRange& range, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double za = (range.min - mu) / sigma;
  const double zb = (range.max - mu) / sigma;
  // Work in whichever tail keeps the probabilities away from 1.
  if (za > 0) {
    const double qa = normal_sf(za), qb = normal_sf(zb);
    if (!(qa > qb)) return range.min;
    const double p = qa - unif(rng) * (qa - qb);
    return mu + sigma * normal_isf(std::clamp(p, qb, qa));
  }
  // Mirror: P(Z < z) = Q(-z).
  const double pa = normal_sf(-za), pb = normal_sf(-zb);
  if (!(pb > pa)) return zb < 0 ? range.max : range.min;
  const double p = pa + unif(rng) * (pb - pa);
  return mu - sigma * normal_isf(std::clamp(p, pa, pb));
}

}  // namespace

void CurriculumParams::validate() const {
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("curriculum: alpha must lie in (0, 1)");
  if (!(beta > 0 && beta < 1)) throw std::invalid_argument("curriculum: beta must lie in (0, 1)");
  if (!(eta > 0 && eta <= 1)) throw std::invalid_argument("curriculum: eta must lie in (0, 1]");
  if (!(sigma_fraction > 0)) throw std::invalid_argument("curriculum: sigma_fraction must be positive");
  range.validate();
}

double update_mu(double mu0, double rho, double alpha, double beta, const BudgetRange& range) {
  if (!(rho >= 0 && rho <= 1)) throw std::invalid_argument("update_mu: pass rate outside [0, 1]");
  const double mu = mu0 * (1.0 - alpha * rho) + beta * (1.0 - rho) * range.max;
  return range.clamp(mu);
}

std::vector<double> problem_weights(const std::vector<double>& rhos) {
  if (rhos.empty()) throw std::invalid_argument("problem_weights: no groups");
  std::vector<double> w(rhos.size());
  bool degenerate = true;
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    if (!(rhos[k] >= 0 && rhos[k] <= 1)) throw std::invalid_argument("problem_weights: pass rate outside [0, 1]");
    w[k] = rhos[k] * (1.0 - rhos[k]);
    if (w[k] >= 1e-9) degenerate = false;
  }
  if (degenerate) return std::vector<double>(rhos.size(), 1.0 / static_cast<double>(rhos.size()));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

int sample_budget(double mu, double sigma, const BudgetRange& range, Rng& rng) {
  if (!(sigma > 0)) throw std::invalid_argument("sample_budget: sigma must be positive");
  std::normal_distribution<double> normal(mu, sigma);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = normal(rng);
    if (x >= range.min && x <= range.max) return round_into(x, range);
  }
  return round_into(inverse_cdf_draw(mu, sigma, range, rng), range);
}

int sample_index(const std::vector<double>& weights, Rng& rng) {
  if (weights.empty()) throw std::invalid_argument("sample_index: empty weights");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding slack: last index with positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0) return static_cast<int>(i);
  return static_cast<int>(weights.size()) - 1;
}

CurriculumState init_curriculum(const std::vector<double>& initial_pass_rates, const std::vector<double>& mu0,
                                const CurriculumParams& params) {
  params.validate();
  if (initial_pass_rates.empty() || initial_pass_rates.size() != mu0.size())
    throw std::invalid_argument("init_curriculum: one pass rate and one base mean per group expected");
  CurriculumState s;
  s.pass_rates = initial_pass_rates;
  s.mu0 = mu0;
  s.sigma.assign(mu0.size(), params.sigma());
  s.mu.resize(mu0.size());
  for (std::size_t k = 0; k < mu0.size(); ++k)
    s.mu[k] = update_mu(mu0[k], s.pass_rates[k], params.alpha, params.beta, params.range);
  s.weights = problem_weights(s.pass_rates);
  return s;
}

CurriculumState update_pass_rates(const CurriculumState& state, const std::vector<GroupResult>& results,
                                  const CurriculumParams& params) {
  if (results.size() != state.pass_rates.size())
    throw std::invalid_argument("update_pass_rates: expected one result per group");
  CurriculumState next = state;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    if (r.attempts < 0 || r.successes < 0 || r.successes > r.attempts)
      throw std::invalid_argument("update_pass_rates: group " + std::to_string(k + 1) +
                                  " has successes outside [0, attempts]");
    if (r.attempts == 0) continue;
    const double rate = static_cast<double>(r.successes) / static_cast<double>(r.attempts);
    next.pass_rates[k] = std::clamp((1.0 - params.eta) * state.pass_rates[k] + params.eta * rate, 0.0, 1.0);
  }
  for (std::size_t k = 0; k < next.mu.size(); ++k)
    next.mu[k] = update_mu(next.mu0[k], next.pass_rates[k], params.alpha, params.beta, params.range);
  next.weights = problem_weights(next.pass_rates);
  next.epoch = state.epoch + 1;
  return next;
}

}  // namespace bacr
