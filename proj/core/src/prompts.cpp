#include "biascert/prompts.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "biascert/errors.hpp"

namespace biascert {

using nlohmann::json;

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw ConfigError("Vocabulary must not be empty");
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], i).second) {
      throw ConfigError("Vocabulary tokens must be distinct: duplicate \"" + tokens_[i] + "\"");
    }
  }
}

std::optional<std::size_t> Vocabulary::id_of(const std::string& token) const {
  const auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string to_string(PivotSource source) {
  switch (source) {
    case PivotSource::Bold: return "bold";
    case PivotSource::Dt: return "dt";
    case PivotSource::Custom: return "custom";
  }
  return "custom";
}

PivotSource pivot_source_from_string(const std::string& text) {
  if (text == "bold") return PivotSource::Bold;
  if (text == "dt") return PivotSource::Dt;
  if (text == "custom") return PivotSource::Custom;
  throw ParseError("unknown pivot source \"" + text + "\" (expected bold, dt, or custom)");
}

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

void check_attributes(const SensitiveAttributeSet& attrs) {
  if (attrs.attributes.size() < 2) {
    throw ConfigError("attribute set for trait \"" + attrs.trait + "\" needs at least 2 attributes");
  }
  std::unordered_set<std::string> seen;
  for (const auto& a : attrs.attributes) {
    if (!seen.insert(a).second) {
      throw ConfigError("attribute set for trait \"" + attrs.trait +
                        "\" has duplicate attribute \"" + a + "\"");
    }
  }
}

std::string replace_placeholder(const std::string& template_text, const std::string& attribute) {
  const std::size_t pos = template_text.find(kAttributePlaceholder);
  std::string out = template_text;
  out.replace(pos, std::string(kAttributePlaceholder).size(), attribute);
  return out;
}

// Residue of a realized prompt: the prompt with one occurrence of the
// attribute substring removed. Returns nullopt when the attribute does not
// occur exactly once.
std::optional<std::string> residue_of(const std::string& prompt, const std::string& attribute) {
  if (attribute.empty()) return std::nullopt;
  if (count_occurrences(prompt, attribute) != 1) return std::nullopt;
  std::string out = prompt;
  out.erase(out.find(attribute), attribute.size());
  return out;
}

}  // namespace

CounterfactualPromptSet make_counterfactual(const std::string& template_text,
                                            const SensitiveAttributeSet& attrs) {
  const std::size_t placeholders = count_occurrences(template_text, kAttributePlaceholder);
  if (placeholders != 1) {
    throw ConfigError("template must contain exactly one " + std::string(kAttributePlaceholder) +
                      " placeholder, found " + std::to_string(placeholders));
  }
  check_attributes(attrs);

  CounterfactualPromptSet set;
  set.template_text = template_text;
  set.attributes = attrs;
  set.prompts.reserve(attrs.attributes.size());
  for (const auto& attribute : attrs.attributes) {
    set.prompts.push_back(replace_placeholder(template_text, attribute));
  }
  return set;
}

bool validate_counterfactual(const CounterfactualPromptSet& set) {
  if (set.prompts.size() < 2) return false;
  if (set.prompts.size() != set.attributes.attributes.size()) return false;

  std::unordered_set<std::string> distinct(set.attributes.attributes.begin(),
                                           set.attributes.attributes.end());
  if (distinct.size() < 2) return false;

  std::optional<std::string> common;
  for (std::size_t i = 0; i < set.prompts.size(); ++i) {
    const auto residue = residue_of(set.prompts[i], set.attributes.attributes[i]);
    if (!residue) return false;
    if (!common) {
      common = residue;
    } else if (*common != *residue) {
      return false;
    }
  }
  return true;
}

std::vector<PivotSet> ingest_pivot_file(const std::string& path,
                                        std::optional<PivotSource> expected_source) {
  std::ifstream in(path);
  if (!in) throw ParseError("pivot file not readable: " + path);

  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("pivot file " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError("pivot file " + path + ": top level must be an array");

  std::vector<PivotSet> sets;
  sets.reserve(doc.size());
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    const std::string locus = path + " record " + std::to_string(i);
    try {
      PivotSet pivot;
      pivot.id = rec.at("id").get<std::string>();
      pivot.source = pivot_source_from_string(rec.at("source").get<std::string>());
      SensitiveAttributeSet attrs;
      attrs.trait = rec.at("trait").get<std::string>();
      attrs.attributes = rec.at("attributes").get<std::vector<std::string>>();
      pivot.base = make_counterfactual(rec.at("template").get<std::string>(), attrs);

      if (!ids.insert(pivot.id).second) {
        throw ParseError("duplicate pivot id \"" + pivot.id + "\"");
      }
      if (expected_source && pivot.source != *expected_source) {
        throw ParseError("record \"" + pivot.id + "\" declares source " +
                         to_string(pivot.source) + ", expected " + to_string(*expected_source));
      }
      if (!validate_counterfactual(pivot.base)) {
        throw ParseError("record \"" + pivot.id + "\" is not a valid counterfactual prompt set");
      }
      sets.push_back(std::move(pivot));
    } catch (const json::exception& e) {
      throw ParseError(locus + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ParseError(locus + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(locus + ": " + e.what());
    }
  }
  return sets;
}

void write_pivot_file(const std::string& path, const std::vector<PivotSet>& sets) {
  json doc = json::array();
  for (const auto& pivot : sets) {
    doc.push_back({{"id", pivot.id},
                   {"source", to_string(pivot.source)},
                   {"template", pivot.base.template_text},
                   {"trait", pivot.base.attributes.trait},
                   {"attributes", pivot.base.attributes.attributes}});
  }
  std::ofstream out(path);
  if (!out) throw ParseError("pivot file not writable: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace biascert
