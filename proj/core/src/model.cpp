#include "biascert/model.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "biascert/digest.hpp"
#include "biascert/errors.hpp"
#include "biascert/rng.hpp"

namespace biascert {

double EmbeddingMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

EmbeddingMatrix EmbeddingMatrix::concat_rows(const EmbeddingMatrix& other) const {
  if (rows == 0) return other;
  if (other.rows == 0) return *this;
  if (cols != other.cols) {
    throw std::invalid_argument("EmbeddingMatrix::concat_rows: column counts differ");
  }
  EmbeddingMatrix out;
  out.rows = rows + other.rows;
  out.cols = cols;
  out.values = values;
  out.values.insert(out.values.end(), other.values.begin(), other.values.end());
  return out;
}

SessionToken fresh_session(std::uint64_t run_id, std::uint64_t sample_index,
                           std::uint32_t prompt_index) {
  static std::atomic<std::uint64_t> counter{1};
  return SessionToken{run_id, sample_index, prompt_index,
                      counter.fetch_add(1, std::memory_order_relaxed)};
}

void Model::require(Capability c, const char* what) const {
  if (!capabilities().has(c)) {
    throw CapabilityError(std::string("model \"") + name() + "\" does not support " + what);
  }
}

std::vector<std::string> Model::tokenize(const std::string&) const {
  require(Capability::Tokenization, "tokenization");
  throw CapabilityError("tokenize not implemented");
}

std::string Model::detokenize(const std::vector<std::string>&) const {
  require(Capability::Tokenization, "tokenization");
  throw CapabilityError("detokenize not implemented");
}

EmbeddingMatrix Model::embed(const std::string&) const {
  require(Capability::EmbeddingInput, "embedding-level input");
  throw CapabilityError("embed not implemented");
}

const Vocabulary& Model::vocabulary() const {
  throw CapabilityError(std::string("model \"") + name() + "\" exposes no vocabulary");
}

std::vector<std::string> whitespace_tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

std::string whitespace_detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {
constexpr std::size_t kMockEmbeddingDim = 16;
}  // namespace

EmbeddingMatrix hash_embedding(const std::vector<std::string>& tokens) {
  EmbeddingMatrix m;
  m.rows = tokens.size();
  m.cols = kMockEmbeddingDim;
  m.values.reserve(m.rows * m.cols);
  for (const auto& token : tokens) {
    Rng stream(fnv1a64(token));
    for (std::size_t c = 0; c < kMockEmbeddingDim; ++c) {
      m.values.push_back(stream.next_in(-1.0, 1.0));
    }
  }
  return m;
}

Vocabulary default_mock_vocabulary() {
  return Vocabulary({
      "the", "a",  "of",    "and",   "to",    "in",   "is",    "for",   "on",     "with",
      "as",  "by", "at",    "from",  "that",  "this", "it",    "are",   "be",     "or",
      "an",  "we", "can",   "has",   "have",  "had",  "not",   "but",   "they",   "their",
      "one", "two", "work", "time",  "people", "way", "world", "life",  "system", "model",
      "data", "test", "run", "case", "value", "point", "place", "group", "part",  "fact",
  });
}

ScriptedModel::ScriptedModel(std::string name, Mode mode, double p_star, std::uint64_t seed,
                             Vocabulary vocab)
    : name_(std::move(name)), mode_(mode), p_star_(p_star), seed_(seed), vocab_(std::move(vocab)) {}

std::shared_ptr<ScriptedModel> ScriptedModel::fixed_response(std::string response,
                                                             Vocabulary vocab) {
  auto model = std::shared_ptr<ScriptedModel>(
      new ScriptedModel("scripted:fixed", Mode::FixedResponse, 0.0, 0, std::move(vocab)));
  model->fixed_ = std::move(response);
  return model;
}

std::shared_ptr<ScriptedModel> ScriptedModel::always_unbiased(Vocabulary vocab) {
  auto model = std::shared_ptr<ScriptedModel>(
      new ScriptedModel("scripted:unbiased", Mode::BiasCoin, 0.0, 0, std::move(vocab)));
  return model;
}

std::shared_ptr<ScriptedModel> ScriptedModel::always_biased(Vocabulary vocab) {
  auto model = std::shared_ptr<ScriptedModel>(
      new ScriptedModel("scripted:biased", Mode::BiasCoin, 1.0, 0, std::move(vocab)));
  return model;
}

std::shared_ptr<ScriptedModel> ScriptedModel::bias_coin(double p_star, std::uint64_t seed,
                                                        Vocabulary vocab) {
  if (!(p_star >= 0.0 && p_star <= 1.0)) {
    throw ConfigError("bias-coin p_star must lie in [0,1]");
  }
  return std::shared_ptr<ScriptedModel>(
      new ScriptedModel("scripted:coin", Mode::BiasCoin, p_star, seed, std::move(vocab)));
}

Capabilities ScriptedModel::capabilities() const {
  return Capabilities::of(
      {Capability::TextGeneration, Capability::Tokenization, Capability::EmbeddingInput});
}

std::string ScriptedModel::generate(const ModelInput& input, const GenerationParams&,
                                    const SessionToken& session) {
  if (std::holds_alternative<EmbeddingMatrix>(input)) {
    require(Capability::EmbeddingInput, "embedding-level input");
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_;
    nonces_seen_.insert(session.nonce);
  }
  if (mode_ == Mode::FixedResponse) return fixed_;

  // One coin per counterfactual set, keyed by (run, sample) so repeated looks
  // at the same sample agree and distinct samples are iid.
  Rng stream = Rng(seed_).substream(session.run_id).substream(session.sample_index);
  const bool biased = stream.bernoulli(p_star_);
  if (biased && session.prompt_index == 0) return bank_.biased;
  return bank_.unbiased;
}

std::vector<std::string> ScriptedModel::tokenize(const std::string& text) const {
  return whitespace_tokenize(text);
}

std::string ScriptedModel::detokenize(const std::vector<std::string>& tokens) const {
  return whitespace_detokenize(tokens);
}

EmbeddingMatrix ScriptedModel::embed(const std::string& text) const {
  return hash_embedding(whitespace_tokenize(text));
}

std::size_t ScriptedModel::calls() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return calls_;
}

std::size_t ScriptedModel::distinct_sessions() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return nonces_seen_.size();
}

}  // namespace biascert
