#pragma once

#include <stdexcept>
#include <string>

namespace gdnn {

/// Process exit codes used by the CLI. Each exception family maps to one.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kNumeric = 2,
  kData = 3,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Bad configuration, schema violation, or invalid argument combination.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::kUsage) {}
};

/// Non-finite value or shape mismatch inside the numeric core.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what, ExitCode::kNumeric) {}
};

/// Malformed input data or a violated data invariant.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, ExitCode::kData) {}
};

}  // namespace gdnn
