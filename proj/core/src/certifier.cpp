#include "biascert/certifier.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "biascert/digest.hpp"
#include "biascert/errors.hpp"

namespace biascert {

using nlohmann::json;

namespace {

constexpr std::size_t kEvidencePerVerdict = 5;

std::string iso8601_utc(std::uint64_t epoch_seconds) {
  std::time_t t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string resolve_created_at(std::optional<std::uint64_t> timestamp_epoch) {
  if (timestamp_epoch) return iso8601_utc(*timestamp_epoch);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    return iso8601_utc(std::strtoull(env, nullptr, 10));
  }
  return iso8601_utc(static_cast<std::uint64_t>(std::time(nullptr)));
}

json prefix_config_json(const PrefixConfig& config) {
  json out;
  out["kind"] = to_string(kind_of(config));
  switch (kind_of(config)) {
    case PrefixKind::Random: {
      const auto& cfg = std::get<RandomPrefixConfig>(config);
      out["length"] = cfg.length;
      break;
    }
    case PrefixKind::Mixture: {
      const auto& cfg = std::get<MixtureConfig>(config);
      out["main"] = cfg.main.joined_text();
      json helpers = json::array();
      for (const auto& jb : cfg.helpers) helpers.push_back(jb.joined_text());
      out["helpers"] = helpers;
      out["interleave_prob"] = cfg.interleave_prob;
      out["mutation_prob"] = cfg.mutation_prob;
      out["helpers_once_per_prefix"] = cfg.helpers_once_per_prefix;
      break;
    }
    case PrefixKind::Soft: {
      const auto& cfg = std::get<SoftPrefixConfig>(config);
      out["main"] = cfg.main.joined_text();
      out["noise_rel"] = cfg.noise_rel;
      break;
    }
  }
  return out;
}

std::string spec_digest_of(const Specification& spec, const json& mode_fields) {
  json canon;
  canon["pivot"] = {{"id", spec.pivot.id},
                    {"source", to_string(spec.pivot.source)},
                    {"template", spec.pivot.base.template_text},
                    {"trait", spec.pivot.base.attributes.trait},
                    {"attributes", spec.pivot.base.attributes.attributes}};
  canon["prefix"] = prefix_config_json(spec.prefix);
  canon["detector"] = spec.detector ? spec.detector->name() : "";
  canon["model"] = spec.model ? spec.model->name() : "";
  canon["generation"] = {{"temperature", spec.generation.temperature},
                         {"top_k", spec.generation.top_k},
                         {"max_new_tokens", spec.generation.max_new_tokens}};
  canon["seed"] = spec.seed;
  canon["mode"] = mode_fields;
  return to_hex(fnv1a64(canon.dump()));
}

// Attribute-independent part of the pivot, handed to scorers as reference.
std::string pivot_context(const PivotSet& pivot) {
  std::string context = pivot.base.template_text;
  const std::size_t pos = context.find(kAttributePlaceholder);
  if (pos != std::string::npos) context.erase(pos, std::string(kAttributePlaceholder).size());
  return context;
}

struct DrawOutcome {
  SampleRecord record;
  bool transport_failure = false;
};

// One attempt: prefix draw, assembly, per-prompt generation in fresh
// sessions, verdict. Sample i's randomness comes only from substream(seed, i).
DrawOutcome draw_sample(const Specification& spec, std::uint64_t attempt, const Rng& root) {
  DrawOutcome outcome;
  SampleRecord& record = outcome.record;
  record.index = attempt;

  Rng stream = root.substream(attempt);
  const PrefixSample prefix = sample_prefix(spec.prefix, *spec.model, stream, attempt);
  record.prefix_digest = to_hex(prefix.digest());

  const std::vector<ModelInput> inputs = assemble_prompt_set(prefix, spec.pivot, *spec.model);
  try {
    record.responses.reserve(inputs.size());
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      const SessionToken session =
          fresh_session(spec.seed, attempt, static_cast<std::uint32_t>(j));
      record.responses.push_back(spec.model->generate(inputs[j], spec.generation, session));
    }
    record.verdict = spec.detector->detect(record.responses, pivot_context(spec.pivot));
    record.status = SampleStatus::Valid;
  } catch (const TransportError& e) {
    record.status = SampleStatus::Excluded;
    record.exclusion_reason = std::string("transport: ") + e.what();
    record.verdict.reset();
    outcome.transport_failure = true;
  } catch (const ScorerError& e) {
    record.status = SampleStatus::Excluded;
    record.exclusion_reason = std::string("scorer: ") + e.what();
    record.verdict.reset();
  }
  return outcome;
}

std::vector<SampleRecord> select_evidence(const std::vector<SampleRecord>& ledger) {
  std::vector<SampleRecord> evidence;
  std::size_t biased = 0;
  std::size_t unbiased = 0;
  for (const auto& record : ledger) {
    if (record.status != SampleStatus::Valid) continue;
    if (record.verdict->biased() && biased < kEvidencePerVerdict) {
      evidence.push_back(record);
      ++biased;
    } else if (!record.verdict->biased() && unbiased < kEvidencePerVerdict) {
      evidence.push_back(record);
      ++unbiased;
    }
  }
  return evidence;
}

[[noreturn]] void throw_partial(std::vector<SampleRecord> ledger, bool transport_seen,
                                std::uint64_t valid, std::uint64_t wanted) {
  const auto reason = transport_seen ? PartialCertificateError::Reason::TransportExhaustion
                                     : PartialCertificateError::Reason::ExclusionBudget;
  std::ostringstream what;
  what << "sample budget exhausted: " << valid << " valid of " << wanted
       << " wanted; excluded attempts: " << (ledger.size() - valid);
  throw PartialCertificateError(reason, std::move(ledger), what.str());
}

json record_json(const SampleRecord& record) {
  json out;
  out["index"] = record.index;
  out["prefix_digest"] = record.prefix_digest;
  out["responses"] = record.responses;
  out["status"] = record.status == SampleStatus::Valid ? "valid" : "excluded";
  if (record.verdict) {
    out["verdict"] = {{"value", record.verdict->value}, {"rationale", record.verdict->rationale}};
  }
  if (!record.exclusion_reason.empty()) out["exclusion_reason"] = record.exclusion_reason;
  return out;
}

SampleRecord record_from_json(const json& in) {
  SampleRecord record;
  record.index = in.at("index").get<std::uint64_t>();
  record.prefix_digest = in.at("prefix_digest").get<std::string>();
  record.responses = in.at("responses").get<std::vector<std::string>>();
  record.status =
      in.at("status").get<std::string>() == "valid" ? SampleStatus::Valid : SampleStatus::Excluded;
  if (in.contains("verdict")) {
    BiasVerdict verdict;
    verdict.value = in["verdict"].at("value").get<int>();
    verdict.rationale = in["verdict"].at("rationale").get<std::string>();
    record.verdict = verdict;
  }
  record.exclusion_reason = in.value("exclusion_reason", "");
  return record;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("not writable: " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void validate_specification(const Specification& spec) {
  if (!spec.model) throw ConfigError("specification has no model");
  if (!spec.detector) throw ConfigError("specification has no detector");
  if (!validate_counterfactual(spec.pivot.base)) {
    throw ConfigError("pivot \"" + spec.pivot.id + "\" is not a valid counterfactual prompt set");
  }
  if (kind_of(spec.prefix) == PrefixKind::Soft &&
      !spec.model->capabilities().has(Capability::EmbeddingInput)) {
    throw ConfigError("soft prefix requires a model with embedding-input capability; model \"" +
                      spec.model->name() + "\" has none");
  }
  if (!spec.detector->supports_arity(spec.pivot.base.arity())) {
    throw ConfigError("detector \"" + spec.detector->name() + "\" does not support " +
                      std::to_string(spec.pivot.base.arity()) + " response groups");
  }
}

std::string to_string(CertifyMode mode) {
  return mode == CertifyMode::FixedN ? "fixed-n" : "adaptive";
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Unbiased: return "unbiased";
    case Verdict::Biased: return "biased";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict verdict_from_string(const std::string& text) {
  if (text == "unbiased") return Verdict::Unbiased;
  if (text == "biased") return Verdict::Biased;
  if (text == "inconclusive") return Verdict::Inconclusive;
  throw ParseError("unknown verdict \"" + text + "\"");
}

Certificate certify_fixed(const Specification& spec, std::uint64_t n, double gamma,
                          std::optional<std::uint64_t> timestamp_epoch) {
  if (n == 0) throw ConfigError("certify_fixed: n must be >= 1");
  validate_specification(spec);

  Certificate cert;
  cert.mode = CertifyMode::FixedN;
  cert.gamma = gamma;
  cert.seed = spec.seed;
  cert.model = spec.model->name();
  cert.pivot_id = spec.pivot.id;
  cert.prefix_kind = kind_of(spec.prefix);
  cert.detector = spec.detector->name();
  cert.spec_digest = spec_digest_of(spec, {{"mode", "fixed-n"}, {"n", n}, {"gamma", gamma}});
  cert.created_at = resolve_created_at(timestamp_epoch);

  const Rng root(spec.seed);
  const std::uint64_t max_attempts = 2 * n;
  std::uint64_t valid = 0;
  std::uint64_t unbiased = 0;
  bool transport_seen = false;

  for (std::uint64_t attempt = 0; attempt < max_attempts && valid < n; ++attempt) {
    DrawOutcome outcome = draw_sample(spec, attempt, root);
    transport_seen = transport_seen || outcome.transport_failure;
    if (outcome.record.status == SampleStatus::Valid) {
      ++valid;
      if (!outcome.record.verdict->biased()) ++unbiased;
    }
    cert.ledger.push_back(std::move(outcome.record));
  }
  if (valid < n) throw_partial(std::move(cert.ledger), transport_seen, valid, n);

  cert.k = unbiased;
  cert.n = valid;
  cert.interval = clopper_pearson(cert.k, cert.n, gamma);
  cert.evidence = select_evidence(cert.ledger);
  return cert;
}

Certificate certify_adaptive(const Specification& spec, double gamma, double eta,
                             std::uint64_t n_max, std::optional<std::uint64_t> timestamp_epoch) {
  if (n_max == 0) throw ConfigError("certify_adaptive: n_max must be >= 1");
  if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("certify_adaptive: eta must lie in [0,1)");
  validate_specification(spec);

  Certificate cert;
  cert.mode = CertifyMode::Adaptive;
  cert.gamma = gamma;
  cert.eta = eta;
  cert.n_max = n_max;
  cert.seed = spec.seed;
  cert.model = spec.model->name();
  cert.pivot_id = spec.pivot.id;
  cert.prefix_kind = kind_of(spec.prefix);
  cert.detector = spec.detector->name();
  cert.spec_digest = spec_digest_of(
      spec, {{"mode", "adaptive"}, {"eta", eta}, {"n_max", n_max}, {"gamma", gamma}});
  cert.created_at = resolve_created_at(timestamp_epoch);

  const Rng root(spec.seed);
  const std::uint64_t max_attempts = 2 * n_max;
  std::uint64_t valid = 0;
  std::uint64_t unbiased = 0;
  bool transport_seen = false;
  SequentialDecision decision;
  decision.verdict = Verdict::Inconclusive;

  for (std::uint64_t attempt = 0; attempt < max_attempts && valid < n_max; ++attempt) {
    DrawOutcome outcome = draw_sample(spec, attempt, root);
    transport_seen = transport_seen || outcome.transport_failure;
    const bool was_valid = outcome.record.status == SampleStatus::Valid;
    if (was_valid) {
      ++valid;
      if (!outcome.record.verdict->biased()) ++unbiased;
    }
    cert.ledger.push_back(std::move(outcome.record));

    if (was_valid) {
      // One look per valid sample. Adaptivity changes only the stopping
      // time; the sampling distribution never depends on earlier outcomes.
      decision = sequential_decide(unbiased, valid, gamma, eta);
      ++cert.looks;
      if (decision.verdict != Verdict::Inconclusive) break;
    }
  }
  if (valid == 0 || (decision.verdict == Verdict::Inconclusive && valid < n_max)) {
    throw_partial(std::move(cert.ledger), transport_seen, valid, n_max);
  }

  cert.k = unbiased;
  cert.n = valid;
  cert.interval = decision.interval;
  cert.verdict = decision.verdict;
  cert.evidence = select_evidence(cert.ledger);
  return cert;
}

double baseline_eval(const PivotSet& pivot, Model& model, const Detector& detector,
                     BaselineMode mode, const Jailbreak* main_jailbreak,
                     const GenerationParams& params, std::uint64_t reps, std::uint64_t seed) {
  if (reps == 0) throw ConfigError("baseline_eval: reps must be >= 1");
  if (mode == BaselineMode::MainJailbreak && main_jailbreak == nullptr) {
    throw ConfigError("baseline_eval: main-jailbreak mode needs a jailbreak");
  }

  std::string prefix_text;
  if (mode == BaselineMode::MainJailbreak) prefix_text = main_jailbreak->joined_text();

  std::uint64_t unbiased = 0;
  for (std::uint64_t rep = 0; rep < reps; ++rep) {
    std::vector<std::string> responses;
    responses.reserve(pivot.base.prompts.size());
    for (std::size_t j = 0; j < pivot.base.prompts.size(); ++j) {
      const std::string input = prefix_text.empty() ? pivot.base.prompts[j]
                                                    : prefix_text + " " + pivot.base.prompts[j];
      const SessionToken session = fresh_session(seed, rep, static_cast<std::uint32_t>(j));
      responses.push_back(model.generate(input, params, session));
    }
    if (!detector.detect(responses, pivot_context(pivot)).biased()) ++unbiased;
  }
  return static_cast<double>(unbiased) / static_cast<double>(reps);
}

std::vector<double> simulate_coverage(const std::vector<double>& true_ps, std::uint64_t n,
                                      double gamma, std::uint64_t reps, Rng& rng) {
  if (n == 0) throw ConfigError("simulate_coverage: n must be >= 1");
  if (reps == 0) throw ConfigError("simulate_coverage: reps must be >= 1");
  for (double p : true_ps) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("simulate_coverage: p must lie in [0,1]");
  }

  // Intervals depend only on k; memoize across the reps.
  std::vector<std::optional<ConfidenceInterval>> cache(n + 1);
  const auto interval_for = [&](std::uint64_t k) -> const ConfidenceInterval& {
    if (!cache[k]) cache[k] = clopper_pearson(k, n, gamma);
    return *cache[k];
  };

  std::vector<double> coverage;
  coverage.reserve(true_ps.size());
  for (double p : true_ps) {
    std::uint64_t contained = 0;
    for (std::uint64_t rep = 0; rep < reps; ++rep) {
      std::uint64_t k = 0;
      for (std::uint64_t i = 0; i < n; ++i) {
        if (rng.bernoulli(p)) ++k;
      }
      if (interval_for(k).contains(p)) ++contained;
    }
    coverage.push_back(static_cast<double>(contained) / static_cast<double>(reps));
  }
  return coverage;
}

std::string display_interval(const ConfidenceInterval& interval) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "(%.2f, %.2f)", interval.lower, interval.upper);
  return buf;
}

SummaryTable summarize(const std::vector<Certificate>& certificates) {
  if (certificates.empty()) throw ConfigError("summarize: no certificates");

  SummaryTable table;
  table.gamma = certificates.front().gamma;
  table.n = certificates.front().n;
  for (const auto& cert : certificates) {
    if (cert.gamma != table.gamma || cert.n != table.n) {
      throw ConfigError("summarize: certificates mix configurations (gamma or n differ)");
    }
  }

  std::map<std::pair<std::string, std::string>, SummaryRow> rows;
  for (const auto& cert : certificates) {
    auto& row = rows[{cert.model, to_string(cert.prefix_kind)}];
    row.model = cert.model;
    row.prefix_kind = cert.prefix_kind;
    ++row.certificates;
    row.mean_lower += cert.interval.lower;
    row.mean_upper += cert.interval.upper;
  }
  for (auto& [_, row] : rows) {
    row.mean_lower /= static_cast<double>(row.certificates);
    row.mean_upper /= static_cast<double>(row.certificates);
    table.rows.push_back(row);
  }
  return table;
}

std::string SummaryTable::to_text() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "gamma=%.4g n=%llu\n", gamma,
                static_cast<unsigned long long>(n));
  out << line;
  std::snprintf(line, sizeof(line), "%-24s %-10s %6s %18s\n", "model", "prefix", "certs",
                "avg bounds");
  out << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%-24s %-10s %6zu     (%.2f, %.2f)\n", row.model.c_str(),
                  to_string(row.prefix_kind).c_str(), row.certificates, row.mean_lower,
                  row.mean_upper);
    out << line;
  }
  return out.str();
}

void write_certificate(const std::string& path, const Certificate& cert,
                       bool with_ledger_sidecar) {
  json out;
  out["spec_digest"] = cert.spec_digest;
  out["model"] = cert.model;
  out["pivot_id"] = cert.pivot_id;
  out["prefix_kind"] = to_string(cert.prefix_kind);
  out["detector"] = cert.detector;
  out["gamma"] = cert.gamma;
  out["mode"] = to_string(cert.mode);
  if (cert.mode == CertifyMode::Adaptive) {
    out["eta"] = cert.eta;
    out["n_max"] = cert.n_max;
    out["looks"] = cert.looks;
  }
  out["k"] = cert.k;
  out["n"] = cert.n;
  out["lower"] = cert.interval.lower;
  out["upper"] = cert.interval.upper;
  if (cert.verdict) out["verdict"] = to_string(*cert.verdict);
  out["seed"] = cert.seed;
  out["created_at"] = cert.created_at;
  json evidence = json::array();
  for (const auto& record : cert.evidence) evidence.push_back(record_json(record));
  out["evidence"] = evidence;

  atomic_write(path, out.dump(2) + "\n");

  if (with_ledger_sidecar) {
    std::string lines;
    for (const auto& record : cert.ledger) lines += record_json(record).dump() + "\n";
    atomic_write(path + ".ledger.jsonl", lines);
  }
}

Certificate read_certificate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("certificate not readable: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("certificate " + path + ": " + e.what());
  }

  Certificate cert;
  try {
    cert.spec_digest = doc.at("spec_digest").get<std::string>();
    cert.model = doc.at("model").get<std::string>();
    cert.pivot_id = doc.at("pivot_id").get<std::string>();
    cert.prefix_kind = prefix_kind_from_string(doc.at("prefix_kind").get<std::string>());
    cert.detector = doc.at("detector").get<std::string>();
    cert.gamma = doc.at("gamma").get<double>();
    cert.mode = doc.at("mode").get<std::string>() == "adaptive" ? CertifyMode::Adaptive
                                                                : CertifyMode::FixedN;
    cert.eta = doc.value("eta", 0.0);
    cert.n_max = doc.value("n_max", std::uint64_t{0});
    cert.looks = doc.value("looks", std::uint64_t{0});
    cert.k = doc.at("k").get<std::uint64_t>();
    cert.n = doc.at("n").get<std::uint64_t>();
    cert.interval.lower = doc.at("lower").get<double>();
    cert.interval.upper = doc.at("upper").get<double>();
    cert.interval.confidence = 1.0 - cert.gamma;
    cert.interval.successes = cert.k;
    cert.interval.trials = cert.n;
    if (doc.contains("verdict")) cert.verdict = verdict_from_string(doc["verdict"]);
    cert.seed = doc.at("seed").get<std::uint64_t>();
    cert.created_at = doc.at("created_at").get<std::string>();
    for (const auto& rec : doc.at("evidence")) cert.evidence.push_back(record_from_json(rec));
  } catch (const json::exception& e) {
    throw ParseError("certificate " + path + ": " + e.what());
  }
  return cert;
}

}  // namespace biascert
