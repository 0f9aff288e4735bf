#include "biascert/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace biascert {

namespace {

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the regularized incomplete Beta integral, evaluated
// with the modified Lentz algorithm. Converges quickly for x < (a+1)/(a+b+2);
// callers switch to the symmetric form outside that range.
double beta_continued_fraction(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;

  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;

  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    // Even step.
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    // Odd step.
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("beta_cdf: continued fraction did not converge");
}

double beta_pdf(double x, double a, double b) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b));
}

void check_shapes(BetaParams params) {
  if (params.a < 1 || params.b < 1) {
    throw std::domain_error("Beta shapes must be integers >= 1");
  }
}

}  // namespace

double beta_cdf(double x, BetaParams params) {
  check_shapes(params);
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error("beta_cdf: x must lie in [0,1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double a = static_cast<double>(params.a);
  const double b = static_cast<double>(params.b);
  const double log_front =
      a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);

  if (x * (a + b) <= a) {
    return std::exp(log_front) * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(1.0 - x, b, a) / b;
}

double beta_quantile(double q, BetaParams params) {
  check_shapes(params);
  if (!(q > 0.0 && q < 1.0)) {
    throw std::domain_error("beta_quantile: q must lie in (0,1)");
  }

  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (beta_cdf(mid, params) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  double x = 0.5 * (lo + hi);
  const double pdf = beta_pdf(x, static_cast<double>(params.a), static_cast<double>(params.b));
  if (pdf > 0.0) {
    const double step = (beta_cdf(x, params) - q) / pdf;
    const double polished = x - step;
    // The bracket is already 1e-12 wide; only accept a polish that stays in it.
    if (polished > lo && polished < hi) x = polished;
  }
  return x;
}

ConfidenceInterval clopper_pearson(std::uint64_t k, std::uint64_t n, double gamma) {
  if (n == 0) throw std::domain_error("clopper_pearson: n must be >= 1");
  if (k > n) throw std::domain_error("clopper_pearson: k must not exceed n");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::domain_error("clopper_pearson: gamma must lie in (0,1)");
  }

  ConfidenceInterval ci;
  ci.confidence = 1.0 - gamma;
  ci.successes = k;
  ci.trials = n;
  ci.lower = (k == 0) ? 0.0 : beta_quantile(gamma / 2.0, BetaParams{k, n - k + 1});
  ci.upper = (k == n) ? 1.0 : beta_quantile(1.0 - gamma / 2.0, BetaParams{k + 1, n - k});
  return ci;
}

SequentialDecision sequential_decide(std::uint64_t k, std::uint64_t n, double gamma, double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw std::domain_error("sequential_decide: eta must lie in [0,1)");
  }
  SequentialDecision decision;
  decision.interval = clopper_pearson(k, n, gamma);
  const double threshold = 1.0 - eta;
  if (decision.interval.lower > threshold) {
    decision.verdict = Verdict::Unbiased;
  } else if (decision.interval.upper < threshold) {
    decision.verdict = Verdict::Biased;
  } else {
    decision.verdict = Verdict::Inconclusive;
  }
  return decision;
}

}  // namespace biascert
