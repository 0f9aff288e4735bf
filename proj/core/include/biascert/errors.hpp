#pragma once

#include <stdexcept>
#include <string>

namespace biascert {

/// Invalid run configuration or invalid operation parameters. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (pivot sets, jailbreak corpus, certificates).
/// Carries a human-readable locus (path, record index/id) in the message.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// A model was asked for a capability it does not have
/// (e.g. embedding-level input on an HTTP chat endpoint). Fatal, not retried.
class CapabilityError : public std::runtime_error {
 public:
  explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

/// Transport-level failure talking to a remote model or scorer, surfaced only
/// after the retry budget is exhausted.
class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

/// The external scorer could not score a response pair. The certifier
/// excludes the affected sample instead of defaulting a verdict.
class ScorerError : public std::runtime_error {
 public:
  explicit ScorerError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace biascert
