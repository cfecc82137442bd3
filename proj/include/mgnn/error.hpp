#pragma once

#include <stdexcept>
#include <string>

namespace mgnn {

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  kSuccess = 0,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Invalid configuration, bad arguments, violated preconditions on user input.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::kConfig, what) {}
};

// Unreadable or malformed data files, invalid graphs.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

// Non-convergence, non-finite values, divergent integrals.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::kNumerical, what) {}
};

}  // namespace mgnn
