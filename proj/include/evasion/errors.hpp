#ifndef EVASION_ERRORS_HPP_
#define EVASION_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace evasion {

/// A point or index fell outside the domain it was required to lie in.
class DomainError : public std::out_of_range {
 public:
  explicit DomainError(const std::string& what) : std::out_of_range(what) {}
};

/// A documented precondition was violated by the caller.
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

/// Base for failures of a numerical procedure on otherwise valid input.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Cholesky factorization kept failing after the maximum jitter.
class IllConditionedError : public NumericalError {
 public:
  explicit IllConditionedError(const std::string& what) : NumericalError(what) {}
};

/// The path tracer did not reach the boundary within its step budget.
class NonConvergenceError : public NumericalError {
 public:
  explicit NonConvergenceError(const std::string& what)
      : NumericalError(what) {}
};

/// Malformed or invalid configuration text. Carries the offending line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

namespace detail {

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace detail
}  // namespace evasion

#endif  // EVASION_ERRORS_HPP_
