#pragma once

#include <stdexcept>
#include <string>

namespace lanmax {

// Value outside the mathematical domain of a function (e.g. eta(p) for p > 0.5).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Mismatched sizes between cooperating objects (noise vector vs. layers, ...).
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor shapes that do not match the network's layer specs.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Too few loss records for a well-posed regression.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or otherwise unusable numeric value during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset files. The message names the byte offset.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config parse/validation failure. The message names the line when known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lanmax
