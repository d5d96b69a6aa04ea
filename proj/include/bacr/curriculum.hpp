#ifndef BACR_CURRICULUM_HPP
#define BACR_CURRICULUM_HPP

#include "bacr/budget_embedding.hpp"
#include "bacr/random.hpp"

#include <vector>

namespace bacr {

struct CurriculumParams {
  double alpha = 0.6;
  double beta = 0.3;
  double eta = 0.1;             // pass-rate EMA rate
  double sigma_fraction = 0.15;  // sigma_k = fraction * (b_max - b_min)
  BudgetRange range;

  void validate() const;
  double sigma() const { return sigma_fraction * (range.max - range.min); }
};

/// Per-group scheduler state. Index k = 0..K-1 holds difficulty group k+1.
struct CurriculumState {
  std::vector<double> pass_rates;
  std::vector<double> mu0;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> weights;
  int epoch = 0;

  int groups() const { return static_cast<int>(pass_rates.size()); }
};

struct GroupResult {
  long successes = 0;
  long attempts = 0;
};

/// mu0 (1 - alpha rho) + beta (1 - rho) b_max, clamped into the budget range.
double update_mu(double mu0, double rho, double alpha, double beta, const BudgetRange& range);

/// w_k proportional to rho_k (1 - rho_k); uniform if every raw weight is below 1e-9.
std::vector<double> problem_weights(const std::vector<double>& rhos);

/// Draw from Normal(mu, sigma^2) conditioned on [b_min, b_max], rounded to the
/// nearest integer inside the range. Rejection first, inverse CDF after 1000 misses.
int sample_budget(double mu, double sigma, const BudgetRange& range, Rng& rng);

/// Index drawn from a normalized weight vector.
int sample_index(const std::vector<double>& weights, Rng& rng);

CurriculumState init_curriculum(const std::vector<double>& initial_pass_rates, const std::vector<double>& mu0,
                                const CurriculumParams& params);

/// EMA pass-rate update for groups with attempts, then mu and weights are recomputed.
CurriculumState update_pass_rates(const CurriculumState& state, const std::vector<GroupResult>& results,
                                  const CurriculumParams& params);

}  // namespace bacr

#endif  // BACR_CURRICULUM_HPP
