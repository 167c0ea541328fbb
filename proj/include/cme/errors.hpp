#pragma once

#include <stdexcept>
#include <string>

namespace cme {

// Invalid configuration or arguments (CLI exit code 1).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (CLI exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Factorization failure or non-finite intermediate (CLI exit code 3).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A chain that failed part-way through; records the last iteration that completed.
class ChainError : public NumericError {
 public:
  ChainError(const std::string& what, long last_good_iteration)
      : NumericError(what), last_good_iteration_(last_good_iteration) {}
  long last_good_iteration() const noexcept { return last_good_iteration_; }

 private:
  long last_good_iteration_;
};

}  // namespace cme
