#pragma once

#include <stdexcept>
#include <string>

namespace dpnls {

// Argument outside the documented domain of an operation.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure (quadrature, root find, time stepping) did not
// reach its tolerance. The message carries the diagnostics.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dpnls
