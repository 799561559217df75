#pragma once

#include <stdexcept>
#include <string>

namespace top {

/// Input outside an operation's domain (negative counts, x > m, bad subset, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A structurally valid request that has no admissible answer, e.g. no
/// cutoff pair on the calibration grid controls the type I error.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files or payloads.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace top
