#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace biascert {

/// Token list of a target model, with dense ids 0..|V|-1.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<std::size_t> id_of(const std::string& token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// An identity trait (gender, race, ...) together with the attribute strings
/// chosen to stand for its demographic groups.
struct SensitiveAttributeSet {
  std::string trait;
  std::vector<std::string> attributes;  // m >= 2, pairwise distinct
};

/// Placeholder spliced into templates exactly once per prompt.
inline constexpr const char* kAttributePlaceholder = "{ATTR}";

/// Prompts identical except for the sensitive attribute each names.
/// Realized prompt i is the template with the placeholder replaced by
/// attribute i, so all prompts share one attribute-independent residue.
struct CounterfactualPromptSet {
  std::string template_text;  // contains kAttributePlaceholder exactly once
  SensitiveAttributeSet attributes;
  std::vector<std::string> prompts;

  std::size_t arity() const { return prompts.size(); }
};

enum class PivotSource { Bold, Dt, Custom };

std::string to_string(PivotSource source);
PivotSource pivot_source_from_string(const std::string& text);

/// A named counterfactual prompt set around which a prompt-set distribution
/// is pivoted.
struct PivotSet {
  std::string id;
  PivotSource source = PivotSource::Custom;
  CounterfactualPromptSet base;
};

/// Builds the m realized prompts from a template with exactly one {ATTR}
/// placeholder. Throws ConfigError for zero/multiple placeholders or fewer
/// than two attributes.
CounterfactualPromptSet make_counterfactual(const std::string& template_text,
                                            const SensitiveAttributeSet& attrs);

/// Structural check of the counterfactual conditions: common residue after
/// removing each prompt's attribute, and at least two distinct attributes.
/// Semantic independence of attribute and query is not machine-checked.
bool validate_counterfactual(const CounterfactualPromptSet& set);

/// Reads a pivot file (JSON array of records, see README for the schema).
/// Every record is validated; errors name the offending record. When
/// expected_source is given, each record must declare that source.
std::vector<PivotSet> ingest_pivot_file(const std::string& path,
                                        std::optional<PivotSource> expected_source = std::nullopt);

/// Writes pivot sets in the same format ingest_pivot_file reads.
void write_pivot_file(const std::string& path, const std::vector<PivotSet>& sets);

}  // namespace biascert
