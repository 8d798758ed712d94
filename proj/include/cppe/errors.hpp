#pragma once

#include <stdexcept>
#include <string>

namespace cppe {

// Bad user input: mismatched ids, invalid parameters, malformed config.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model parameters (non-PSD covariance, delta outside (0,1), ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejection sampling gave up.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested object would be too large to materialize.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Regret bookkeeping saw an action or agent it does not know.
class AccountingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cppe
