#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "biascert/detectors.hpp"
#include "biascert/model.hpp"
#include "biascert/prefix.hpp"
#include "biascert/prompts.hpp"
#include "biascert/rng.hpp"
#include "biascert/stats.hpp"

namespace biascert {

/// Everything that defines one certification target: the prompt-set
/// distribution (pivot + prefix distribution), the bias detector, the model
/// under test, and the seed that makes the run reproducible.
struct Specification {
  PivotSet pivot;
  PrefixConfig prefix;
  DetectorPtr detector;
  ModelPtr model;
  GenerationParams generation;
  std::uint64_t seed = 0;
};

/// Throws ConfigError when the specification is internally inconsistent
/// (soft prefix without embedding-input capability, detector arity vs.
/// pivot attribute count, missing detector or model).
void validate_specification(const Specification& spec);

enum class SampleStatus { Valid, Excluded };

/// One draw of the Bernoulli variable: prefix, responses, verdict.
/// Excluded records carry no verdict and are not counted in (k, n).
struct SampleRecord {
  std::uint64_t index = 0;       // attempt index; also the seed substream id
  std::string prefix_digest;
  std::vector<std::string> responses;
  std::optional<BiasVerdict> verdict;
  SampleStatus status = SampleStatus::Valid;
  std::string exclusion_reason;  // set for excluded records
};

enum class CertifyMode { FixedN, Adaptive };

std::string to_string(CertifyMode mode);
std::string to_string(Verdict verdict);
Verdict verdict_from_string(const std::string& text);

/// High-confidence bounds on the probability of unbiased responses for one
/// specification, with the evidence that produced them.
struct Certificate {
  std::string spec_digest;
  std::string model;
  std::string pivot_id;
  PrefixKind prefix_kind = PrefixKind::Random;
  std::string detector;
  double gamma = 0.05;
  CertifyMode mode = CertifyMode::FixedN;
  double eta = 0.0;            // adaptive mode
  std::uint64_t n_max = 0;     // adaptive mode
  std::uint64_t looks = 0;     // adaptive mode: number of interval computations
  std::uint64_t k = 0;         // unbiased samples
  std::uint64_t n = 0;         // valid samples
  ConfidenceInterval interval;
  std::optional<Verdict> verdict;  // adaptive mode only
  std::uint64_t seed = 0;
  std::string created_at;
  std::vector<SampleRecord> evidence;  // first 5 biased + first 5 unbiased
  std::vector<SampleRecord> ledger;    // every attempt, in order
};

/// Raised when the sample budget (valid draws plus replacements) runs out
/// before the requested evidence exists. Carries the ledger so far.
class PartialCertificateError : public std::runtime_error {
 public:
  enum class Reason { TransportExhaustion, ExclusionBudget };

  PartialCertificateError(Reason reason, std::vector<SampleRecord> ledger, const std::string& what)
      : std::runtime_error(what), reason_(reason), ledger_(std::move(ledger)) {}

  Reason reason() const { return reason_; }
  const std::vector<SampleRecord>& ledger() const { return ledger_; }

 private:
  Reason reason_;
  std::vector<SampleRecord> ledger_;
};

/// Draws n valid iid samples of the prompt-set distribution, queries the
/// model prompt-by-prompt in fresh sessions, detects bias, and returns the
/// Clopper-Pearson certificate. Excluded samples (scorer or transport
/// failure) are replaced by fresh draws, capped at 2n total attempts.
/// timestamp_epoch pins created_at; otherwise SOURCE_DATE_EPOCH or wall
/// clock is used.
Certificate certify_fixed(const Specification& spec, std::uint64_t n, double gamma,
                          std::optional<std::uint64_t> timestamp_epoch = std::nullopt);

/// Sequential variant: recomputes the interval after every valid sample and
/// stops at the first Unbiased/Biased decision, or at n_max with
/// Inconclusive. The certificate records the number of looks taken.
Certificate certify_adaptive(const Specification& spec, double gamma, double eta,
                             std::uint64_t n_max,
                             std::optional<std::uint64_t> timestamp_epoch = std::nullopt);

enum class BaselineMode { NoPrefix, MainJailbreak };

/// Benchmarking-style baseline: evaluates the pivot prompts (optionally
/// prefixed with the unmodified main jailbreak) `reps` times and returns the
/// mean unbiased fraction.
double baseline_eval(const PivotSet& pivot, Model& model, const Detector& detector,
                     BaselineMode mode, const Jailbreak* main_jailbreak,
                     const GenerationParams& params, std::uint64_t reps = 5,
                     std::uint64_t seed = 0);

/// Synthetic validity study: for each true p draws `reps` batches of n
/// Bernoulli(p) outcomes, builds CP intervals, and returns the fraction of
/// intervals containing p.
std::vector<double> simulate_coverage(const std::vector<double>& true_ps, std::uint64_t n,
                                      double gamma, std::uint64_t reps, Rng& rng);

struct SummaryRow {
  std::string model;
  PrefixKind prefix_kind = PrefixKind::Random;
  std::size_t certificates = 0;
  double mean_lower = 0.0;
  double mean_upper = 0.0;
};

struct SummaryTable {
  double gamma = 0.0;
  std::uint64_t n = 0;
  std::vector<SummaryRow> rows;

  /// 2-decimal display table.
  std::string to_text() const;
};

/// Per (model, prefix kind) arithmetic means of the bounds. All certificates
/// must share gamma and n; ConfigError otherwise.
SummaryTable summarize(const std::vector<Certificate>& certificates);

/// Certificate files are canonical JSON; writes are atomic
/// (write-then-rename). The full ledger goes to a JSON-lines sidecar next to
/// the certificate ("<path>.ledger.jsonl").
void write_certificate(const std::string& path, const Certificate& certificate,
                       bool with_ledger_sidecar = true);
Certificate read_certificate(const std::string& path);

/// "(0.93, 1.00)" — bounds rounded to 2 decimals at report time only.
std::string display_interval(const ConfidenceInterval& interval);

}  // namespace biascert
