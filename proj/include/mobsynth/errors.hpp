#pragma once

#include <stdexcept>
#include <string>

namespace mobsynth {

/// Invalid configuration values (world, window, model, pipeline).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (null area, token >= V, bin mismatch).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class VocabularyError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Raised when training produces non-finite losses or gradients.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric inputs that cannot produce a meaningful result (no trips, empty corpus...).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mobsynth
