#pragma once

#include <stdexcept>
#include <string>

namespace sdnbs {

/// An iterative evaluation ran out of its iteration budget.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The closed form lost too many significant digits to be trusted; callers
/// are expected to fall back to the direct series.
class CancellationError : public std::runtime_error {
 public:
  CancellationError(const std::string& what, double bracket, double largest_term)
      : std::runtime_error(what), bracket_(bracket), largest_term_(largest_term) {}

  double bracket() const noexcept { return bracket_; }
  double largest_term() const noexcept { return largest_term_; }

 private:
  double bracket_;
  double largest_term_;
};

}  // namespace sdnbs
