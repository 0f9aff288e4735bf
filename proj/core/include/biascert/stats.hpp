#pragma once

#include <cstdint>

namespace biascert {

/// Integer shape parameters of a Beta distribution. Shapes here are always
/// counts derived from (k, n), so non-integer shapes are rejected by design.
struct BetaParams {
  std::uint64_t a = 1;
  std::uint64_t b = 1;
};

/// Exact binomial-proportion confidence interval for k successes in n trials.
struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 1.0;
  double confidence = 0.0;  // 1 - gamma
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;

  bool contains(double p) const { return lower <= p && p <= upper; }
};

enum class Verdict { Unbiased, Biased, Inconclusive };

/// Outcome of one look of the sequential decision rule at threshold 1 - eta.
struct SequentialDecision {
  Verdict verdict = Verdict::Inconclusive;
  ConfidenceInterval interval;
};

/// Regularized incomplete Beta integral F(x; a, b) for integer shapes >= 1.
/// Monotone nondecreasing in x with F(0) = 0 and F(1) = 1.
/// Throws std::domain_error for x outside [0,1] or zero shapes.
double beta_cdf(double x, BetaParams params);

/// Inverse of beta_cdf: the x in (0,1) with beta_cdf(x) = q, to better than
/// 1e-10 absolute. Bisection to 1e-12 interval width plus one Newton polish
/// step; the CDF is strictly increasing on (0,1) so bisection cannot fail.
/// Throws std::domain_error for q outside (0,1) or zero shapes.
double beta_quantile(double q, BetaParams params);

/// Clopper-Pearson interval: lower solves Pr{X >= k | p} = gamma/2, upper
/// solves Pr{X <= k | p} = gamma/2, obtained as Beta quantiles with shapes
/// (k, n-k+1) and (k+1, n-k). k = 0 pins lower to 0, k = n pins upper to 1.
/// Throws std::domain_error for k > n, n = 0, or gamma outside (0,1).
ConfidenceInterval clopper_pearson(std::uint64_t k, std::uint64_t n, double gamma);

/// One look of the sequential rule: Unbiased when the CP lower bound clears
/// 1 - eta, Biased when the upper bound falls below it, else Inconclusive.
/// Requires 0 <= eta < 1 on top of the clopper_pearson preconditions.
SequentialDecision sequential_decide(std::uint64_t k, std::uint64_t n, double gamma, double eta);

}  // namespace biascert
