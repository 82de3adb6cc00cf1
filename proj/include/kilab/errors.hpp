#pragma once

#include <stdexcept>
#include <string>

namespace kilab {

/// Process exit codes shared by the CLI and the harness.
enum class ExitCode : int {
  ok = 0,
  usage = 1,
  numerical = 2,
  verification = 3,
};

/// Bad arguments, malformed configs, out-of-range requests.
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// Factorization failures, non-converging quadrature, overflow.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw UsageError(message);
}

}  // namespace kilab
