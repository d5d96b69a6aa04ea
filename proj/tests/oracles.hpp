#ifndef BACR_TEST_ORACLES_HPP
#define BACR_TEST_ORACLES_HPP

// Reference computations written independently of the library code paths.

#include <cmath>
#include <vector>

namespace bacr::testing {

inline double normal_cdf(double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); }

/// Mean and standard deviation of round(X) for X ~ Normal(mu, sigma^2) conditioned
/// on [lo, hi], with integer endpoints. Half-integer cell edges are clipped to the range.
struct DiscreteMoments {
  double mean = 0;
  double sd = 0;
};

inline DiscreteMoments rounded_truncnorm_moments(double mu, double sigma, int lo, int hi) {
  const double z = normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma);
  double m1 = 0, m2 = 0;
  for (int n = lo; n <= hi; ++n) {
    const double a = std::max<double>(lo, n - 0.5), b = std::min<double>(hi, n + 0.5);
    const double p = (normal_cdf((b - mu) / sigma) - normal_cdf((a - mu) / sigma)) / z;
    m1 += n * p;
    m2 += double(n) * n * p;
  }
  return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

/// Cumulative dense reward from an outcome vector, by the definition: progress is
/// the first outcome then successive differences, dense = outcome + lambda * progress.
inline double cumulative_by_definition(const std::vector<int>& outcomes, double lambda) {
  double sum = 0;
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    const int prev = j == 0 ? 0 : outcomes[j - 1];
    sum += outcomes[j] + lambda * (outcomes[j] - prev);
  }
  return sum / static_cast<double>(outcomes.size());
}

}  // namespace bacr::testing

#endif  // BACR_TEST_ORACLES_HPP
