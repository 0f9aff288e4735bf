#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "biascert/prompts.hpp"

namespace biascert {

/// Decoding knobs forwarded to the target model. max_new_tokens has no
/// canonical default and must be set by the run configuration.
struct GenerationParams {
  double temperature = 1.0;
  std::uint32_t top_k = 10;
  std::uint32_t max_new_tokens = 0;
};

enum class Capability : unsigned {
  TextGeneration = 1u << 0,
  Tokenization = 1u << 1,
  EmbeddingInput = 1u << 2,
};

struct Capabilities {
  unsigned flags = 0;

  bool has(Capability c) const { return (flags & static_cast<unsigned>(c)) != 0; }
  static Capabilities of(std::initializer_list<Capability> caps) {
    Capabilities out;
    for (Capability c : caps) out.flags |= static_cast<unsigned>(c);
    return out;
  }
};

enum class Transport { HttpApi, InProcessMock };

/// Row-major matrix of token embeddings; rows = token positions.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double max_abs() const;

  /// This matrix stacked on top of other (rows concatenated). Column counts
  /// must match.
  EmbeddingMatrix concat_rows(const EmbeddingMatrix& other) const;
};

/// Either plain text or an embedding-level input for models that accept one.
using ModelInput = std::variant<std::string, EmbeddingMatrix>;

/// Marker for one fresh chat session. Every generate call gets its own token;
/// the ids let scripted models behave as pure functions of the certification
/// sample they serve.
struct SessionToken {
  std::uint64_t run_id = 0;
  std::uint64_t sample_index = 0;
  std::uint32_t prompt_index = 0;
  std::uint64_t nonce = 0;  // process-unique
};

SessionToken fresh_session(std::uint64_t run_id, std::uint64_t sample_index,
                           std::uint32_t prompt_index);

/// Black-box boundary to a text generator. Capability getters throw
/// CapabilityError unless the concrete model opted in.
class Model {
 public:
  virtual ~Model() = default;

  virtual const std::string& name() const = 0;
  virtual Capabilities capabilities() const = 0;
  virtual Transport transport() const = 0;

  /// One completion in a fresh session. Content-filter refusals come back as
  /// ordinary responses; transport problems surface as TransportError after
  /// the retry budget, capability mismatches as CapabilityError.
  virtual std::string generate(const ModelInput& input, const GenerationParams& params,
                               const SessionToken& session) = 0;

  virtual std::vector<std::string> tokenize(const std::string& text) const;
  virtual std::string detokenize(const std::vector<std::string>& tokens) const;
  virtual EmbeddingMatrix embed(const std::string& text) const;
  virtual const Vocabulary& vocabulary() const;

 protected:
  void require(Capability c, const char* what) const;
};

using ModelPtr = std::shared_ptr<Model>;

/// Splits on runs of whitespace; joining with single spaces is the declared
/// normalization, so detokenize(tokenize(t)) == t for single-spaced t.
std::vector<std::string> whitespace_tokenize(const std::string& text);
std::string whitespace_detokenize(const std::vector<std::string>& tokens);

/// Deterministic per-token hash embedding, dimension 16, entries in [-1, 1].
EmbeddingMatrix hash_embedding(const std::vector<std::string>& tokens);

/// Word list used by scripted models when no vocabulary is configured.
Vocabulary default_mock_vocabulary();

/// In-process stand-in for a target model. fixed-response mode always replies
/// with one template; bias-coin mode makes the shipped detectors score each
/// counterfactual set biased with probability exactly p_star, drawing the
/// per-set coin from its own seeded stream keyed by (run, sample) ids.
class ScriptedModel : public Model {
 public:
  enum class Mode { FixedResponse, BiasCoin };

  /// Response templates per verdict: `unbiased` is scored 0 by the shipped
  /// detectors; `biased` marks the first response of a biased set.
  struct ResponseBank {
    std::string unbiased = "I disagree with that.";
    std::string biased = "I agree with that.";
  };

  static std::shared_ptr<ScriptedModel> fixed_response(std::string response,
                                                       Vocabulary vocab = default_mock_vocabulary());
  static std::shared_ptr<ScriptedModel> always_unbiased(Vocabulary vocab = default_mock_vocabulary());
  static std::shared_ptr<ScriptedModel> always_biased(Vocabulary vocab = default_mock_vocabulary());
  static std::shared_ptr<ScriptedModel> bias_coin(double p_star, std::uint64_t seed,
                                                  Vocabulary vocab = default_mock_vocabulary());

  const std::string& name() const override { return name_; }
  Capabilities capabilities() const override;
  Transport transport() const override { return Transport::InProcessMock; }

  std::string generate(const ModelInput& input, const GenerationParams& params,
                       const SessionToken& session) override;

  std::vector<std::string> tokenize(const std::string& text) const override;
  std::string detokenize(const std::vector<std::string>& tokens) const override;
  EmbeddingMatrix embed(const std::string& text) const override;
  const Vocabulary& vocabulary() const override { return vocab_; }

  // State probes for session-freshness tests.
  std::size_t calls() const;
  std::size_t distinct_sessions() const;

 private:
  ScriptedModel(std::string name, Mode mode, double p_star, std::uint64_t seed, Vocabulary vocab);

  std::string name_;
  Mode mode_;
  double p_star_ = 0.0;
  std::uint64_t seed_ = 0;
  ResponseBank bank_;
  std::string fixed_;
  Vocabulary vocab_;

  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
  std::unordered_set<std::uint64_t> nonces_seen_;
};

}  // namespace biascert
