#pragma once

#include <stdexcept>
#include <string>

namespace gfs {

/// Argument outside the mathematical domain of an operation (negative kernel
/// value, non-finite input, degenerate surfel).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke a documented precondition (unsorted records, missing cache,
/// mismatched image shapes).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gfs
