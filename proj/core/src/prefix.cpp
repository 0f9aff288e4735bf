#include "biascert/prefix.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "biascert/digest.hpp"
#include "biascert/errors.hpp"

namespace biascert {

using nlohmann::json;

std::string Jailbreak::joined_text() const {
  return whitespace_detokenize(instructions);
}

JailbreakCorpus load_jailbreak_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("jailbreak corpus not readable: " + path);

  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("jailbreak corpus " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError("jailbreak corpus " + path + ": top level must be an array");

  JailbreakCorpus corpus;
  bool have_main = false;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string locus = path + " record " + std::to_string(i);
    try {
      const json& rec = doc[i];
      Jailbreak jb;
      jb.name = rec.at("name").get<std::string>();
      jb.instructions = rec.at("instructions").get<std::vector<std::string>>();
      if (jb.instructions.empty()) {
        throw ParseError("jailbreak \"" + jb.name + "\" has no instructions");
      }
      for (const auto& instruction : jb.instructions) {
        if (instruction.empty()) {
          throw ParseError("jailbreak \"" + jb.name + "\" has an empty instruction");
        }
      }
      const std::string role = rec.at("role").get<std::string>();
      if (role == "main") {
        if (have_main) throw ParseError("more than one jailbreak has role \"main\"");
        corpus.main = std::move(jb);
        have_main = true;
      } else if (role == "helper") {
        corpus.helpers.push_back(std::move(jb));
      } else {
        throw ParseError("unknown role \"" + role + "\" (expected main or helper)");
      }
    } catch (const json::exception& e) {
      throw ParseError(locus + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(locus + ": " + e.what());
    }
  }
  if (!have_main) throw ParseError("jailbreak corpus " + path + ": no jailbreak has role \"main\"");
  return corpus;
}

PrefixKind kind_of(const PrefixConfig& config) {
  switch (config.index()) {
    case 0: return PrefixKind::Random;
    case 1: return PrefixKind::Mixture;
    default: return PrefixKind::Soft;
  }
}

std::string to_string(PrefixKind kind) {
  switch (kind) {
    case PrefixKind::Random: return "random";
    case PrefixKind::Mixture: return "mixture";
    case PrefixKind::Soft: return "soft";
  }
  return "random";
}

PrefixKind prefix_kind_from_string(const std::string& text) {
  if (text == "random") return PrefixKind::Random;
  if (text == "mixture") return PrefixKind::Mixture;
  if (text == "soft") return PrefixKind::Soft;
  throw ConfigError("unknown prefix kind \"" + text + "\" (expected random, mixture, or soft)");
}

const std::vector<std::string>& PrefixSample::tokens() const {
  return std::get<std::vector<std::string>>(payload);
}

const SoftPrefix& PrefixSample::soft() const {
  return std::get<SoftPrefix>(payload);
}

std::uint64_t PrefixSample::digest() const {
  std::uint64_t h = fnv1a64(to_string(kind));
  if (kind == PrefixKind::Soft) {
    const auto& m = soft().matrix;
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(m.values.data()),
                                 m.values.size() * sizeof(double)),
                h);
  } else {
    for (const auto& token : tokens()) {
      h = fnv1a64(token, h);
      h = fnv1a64(std::string_view("\x1f", 1), h);
    }
  }
  return h;
}

std::vector<std::string> sample_random_prefix(const Vocabulary& vocab, std::size_t length,
                                              Rng& rng) {
  if (length == 0) throw std::domain_error("sample_random_prefix: length must be >= 1");
  if (vocab.empty()) throw std::domain_error("sample_random_prefix: vocabulary is empty");
  std::vector<std::string> tokens;
  tokens.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    tokens.push_back(vocab.token(rng.next_below(vocab.size())));
  }
  return tokens;
}

namespace {

// All helper instructions, flattened in corpus order.
std::vector<const std::string*> flatten_helpers(const std::vector<Jailbreak>& helpers) {
  std::vector<const std::string*> all;
  for (const auto& jb : helpers) {
    for (const auto& instruction : jb.instructions) all.push_back(&instruction);
  }
  return all;
}

}  // namespace

std::string interleave(const Jailbreak& main, const std::vector<Jailbreak>& helpers,
                       double interleave_prob, Rng& rng, bool helpers_once_per_prefix) {
  if (main.instructions.empty()) {
    throw std::domain_error("interleave: main jailbreak has no instructions");
  }
  const auto all_helpers = flatten_helpers(helpers);
  std::vector<bool> used(all_helpers.size(), false);

  std::vector<std::string> parts;
  for (const auto& instruction : main.instructions) {
    parts.push_back(instruction);
    // Block after this instruction: independent inclusion coins, then a
    // uniform shuffle of the included instructions.
    std::vector<std::size_t> included;
    for (std::size_t h = 0; h < all_helpers.size(); ++h) {
      if (helpers_once_per_prefix && used[h]) continue;
      if (rng.bernoulli(interleave_prob)) included.push_back(h);
    }
    rng.shuffle(included);
    for (std::size_t h : included) {
      parts.push_back(*all_helpers[h]);
      used[h] = true;
    }
  }
  return whitespace_detokenize(parts);
}

std::vector<std::string> mutate(std::vector<std::string> tokens, const Vocabulary& vocab,
                                double mutation_prob, Rng& rng) {
  if (mutation_prob > 0.0 && vocab.empty()) {
    throw std::domain_error("mutate: vocabulary is empty");
  }
  for (auto& token : tokens) {
    if (rng.bernoulli(mutation_prob)) {
      token = vocab.token(rng.next_below(vocab.size()));
    }
  }
  return tokens;
}

std::vector<std::string> sample_mixture_prefix(const MixtureConfig& config, const Model& model,
                                               Rng& rng) {
  const std::string text = interleave(config.main, config.helpers, config.interleave_prob, rng,
                                      config.helpers_once_per_prefix);
  return mutate(model.tokenize(text), model.vocabulary(), config.mutation_prob, rng);
}

SoftPrefix sample_soft_prefix(const Jailbreak& main, const Model& model, double noise_rel,
                              Rng& rng) {
  if (noise_rel < 0.0) throw std::domain_error("sample_soft_prefix: noise_rel must be >= 0");
  SoftPrefix prefix;
  prefix.matrix = model.embed(main.joined_text());
  const double radius = noise_rel * prefix.matrix.max_abs();
  if (radius > 0.0) {
    for (double& v : prefix.matrix.values) v += rng.next_in(-radius, radius);
  }
  return prefix;
}

PrefixSample sample_prefix(const PrefixConfig& config, const Model& model, Rng& rng,
                           std::uint64_t seed) {
  PrefixSample sample;
  sample.kind = kind_of(config);
  sample.seed = seed;
  switch (sample.kind) {
    case PrefixKind::Random: {
      const auto& cfg = std::get<RandomPrefixConfig>(config);
      sample.payload = sample_random_prefix(model.vocabulary(), cfg.length, rng);
      break;
    }
    case PrefixKind::Mixture: {
      sample.payload = sample_mixture_prefix(std::get<MixtureConfig>(config), model, rng);
      break;
    }
    case PrefixKind::Soft: {
      const auto& cfg = std::get<SoftPrefixConfig>(config);
      sample.payload = sample_soft_prefix(cfg.main, model, cfg.noise_rel, rng);
      break;
    }
  }
  return sample;
}

std::vector<ModelInput> assemble_prompt_set(const PrefixSample& prefix, const PivotSet& pivot,
                                            const Model& model) {
  std::vector<ModelInput> inputs;
  inputs.reserve(pivot.base.prompts.size());

  if (prefix.kind == PrefixKind::Soft) {
    if (!model.capabilities().has(Capability::EmbeddingInput)) {
      throw CapabilityError("soft prefix requires a model that accepts embedding-level input");
    }
    for (const auto& prompt : pivot.base.prompts) {
      inputs.emplace_back(prefix.soft().matrix.concat_rows(model.embed(prompt)));
    }
    return inputs;
  }

  const std::string prefix_text = whitespace_detokenize(prefix.tokens());
  for (const auto& prompt : pivot.base.prompts) {
    if (prefix_text.empty()) {
      inputs.emplace_back(prompt);
    } else {
      inputs.emplace_back(prefix_text + " " + prompt);
    }
  }
  return inputs;
}

}  // namespace biascert
