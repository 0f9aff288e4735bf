#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "biascert/model.hpp"
#include "biascert/prompts.hpp"
#include "biascert/rng.hpp"

namespace biascert {

/// A jailbreak as a curated, ordered list of instructions. Corpus files carry
/// instructions pre-split; no sentence segmentation happens here.
struct Jailbreak {
  std::string name;
  std::vector<std::string> instructions;

  /// Instructions joined with single spaces.
  std::string joined_text() const;
};

/// Main jailbreak plus helper corpus for the mixture constructor.
struct JailbreakCorpus {
  Jailbreak main;
  std::vector<Jailbreak> helpers;
};

/// Reads a jailbreak corpus (JSON array of {name, role, instructions}).
/// Exactly one record must have role "main".
JailbreakCorpus load_jailbreak_corpus(const std::string& path);

struct RandomPrefixConfig {
  std::size_t length = 100;
};

struct MixtureConfig {
  Jailbreak main;
  std::vector<Jailbreak> helpers;
  double interleave_prob = 0.2;
  double mutation_prob = 0.01;
  /// Default: every insertion slot draws its own inclusion coins, so one
  /// helper instruction may land in several slots. When true, each helper
  /// instruction is eligible at most once per prefix.
  bool helpers_once_per_prefix = false;
};

struct SoftPrefixConfig {
  Jailbreak main;
  /// Noise radius relative to the max-magnitude entry of the embedded main
  /// jailbreak: R = noise_rel * max|E|.
  double noise_rel = 0.02;
};

using PrefixConfig = std::variant<RandomPrefixConfig, MixtureConfig, SoftPrefixConfig>;

enum class PrefixKind { Random, Mixture, Soft };

PrefixKind kind_of(const PrefixConfig& config);
std::string to_string(PrefixKind kind);
PrefixKind prefix_kind_from_string(const std::string& text);

/// Embedding matrix of a jailbreak after entrywise uniform noise.
struct SoftPrefix {
  EmbeddingMatrix matrix;
};

/// One draw from a prefix distribution, reproducible from (kind, config, seed).
struct PrefixSample {
  PrefixKind kind = PrefixKind::Random;
  std::variant<std::vector<std::string>, SoftPrefix> payload;
  std::uint64_t seed = 0;

  const std::vector<std::string>& tokens() const;
  const SoftPrefix& soft() const;
  std::uint64_t digest() const;
};

/// Exactly `length` tokens drawn independently and uniformly from the
/// vocabulary. Throws std::domain_error for zero length or an empty vocabulary.
std::vector<std::string> sample_random_prefix(const Vocabulary& vocab, std::size_t length,
                                              Rng& rng);

/// Crossover step of the mixture constructor: after every main instruction a
/// block is built by including each helper instruction independently with
/// probability interleave_prob and shuffling the included ones within the
/// block. Main instructions keep their source order. Returns text joined with
/// single spaces.
std::string interleave(const Jailbreak& main, const std::vector<Jailbreak>& helpers,
                       double interleave_prob, Rng& rng, bool helpers_once_per_prefix = false);

/// Mutation step: each position is independently redrawn uniformly from the
/// vocabulary with probability mutation_prob (the redraw may reproduce the
/// original token). Length is preserved.
std::vector<std::string> mutate(std::vector<std::string> tokens, const Vocabulary& vocab,
                                double mutation_prob, Rng& rng);

/// Full mixture construction: interleave, tokenize with the model, mutate
/// over the model vocabulary.
std::vector<std::string> sample_mixture_prefix(const MixtureConfig& config, const Model& model,
                                               Rng& rng);

/// Embeds the main jailbreak and adds entrywise uniform noise on [-R, R] with
/// R = noise_rel * max|E|. The perturbation max-norm never exceeds R.
SoftPrefix sample_soft_prefix(const Jailbreak& main, const Model& model, double noise_rel,
                              Rng& rng);

/// One draw of the configured prefix distribution, stamped with `seed` for
/// the sample ledger.
PrefixSample sample_prefix(const PrefixConfig& config, const Model& model, Rng& rng,
                           std::uint64_t seed);

/// Applies one prefix uniformly to every prompt of the pivot set. Token
/// prefixes concatenate as text (single space joint; an empty prefix leaves
/// prompts unchanged); soft prefixes stack their rows above the embedded
/// prompt and require a model that accepts embedding-level input.
std::vector<ModelInput> assemble_prompt_set(const PrefixSample& prefix, const PivotSet& pivot,
                                            const Model& model);

}  // namespace biascert
