#pragma once

#include <stdexcept>
#include <string>

namespace relax {

/// Input outside the domain of a model function (non-finite, non-positive rate, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a set of raw counts cannot produce a ratio estimate.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The information matrix of a delay pair is singular.
class UninformativeDesign : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Bayes update whose likelihood vanishes on the whole grid support.
class UpdateRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file or flag problem; `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : "field '" + field + "': " + what),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace relax
