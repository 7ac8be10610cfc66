#pragma once

#include <stdexcept>

namespace coharq {

/// Invalid user-supplied configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A band assignment broke the allocation invariants.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Analytic inputs are inconsistent (e.g. event probabilities not summing to 1).
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough resolvable points for a slope fit, or no crossing for an
/// interpolation (CLI exit code 3).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coharq
