#pragma once

#include <stdexcept>
#include <string>

namespace coalesce {

/// Bad input: malformed vectors, out-of-range parameters, broken preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to deliver (solver non-convergence, scale guard).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace coalesce
