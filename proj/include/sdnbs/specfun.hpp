#pragma once

// Scalar special functions used by the flow-table delay model: log-factorial,
// Poisson pmf / CDF / survival function, and the exponential integral Ei(x)
// for positive x.
//
// Everything here is pure and reentrant.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sdnbs/compensated_sum.hpp"
#include "sdnbs/errors.hpp"

namespace sdnbs {

/// Euler–Mascheroni constant.
inline constexpr double kEulerGamma = std::numbers::egamma_v<double>;

/// Ei(1), used by the literal form of the closed-form integration constant.
inline constexpr double kEi1 = 1.8951178163559367554665209343316342690170605817327;

/// Below this argument Ei is evaluated by its ascending series, above it by
/// the asymptotic expansion.
inline constexpr double kEiSwitchover = 40.0;

/// Convergence controls for the iterative evaluators.
struct Accuracy {
  double rel_tol = 1e-13;
  std::int64_t max_iter = 10'000;

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol < 1e-3)) {
      throw std::invalid_argument("Accuracy.rel_tol must lie in (0, 1e-3)");
    }
    if (max_iter < 10) {
      throw std::invalid_argument("Accuracy.max_iter must be >= 10");
    }
  }
};

/// Tightest tolerance the evaluators accept; stops a series once the next
/// term no longer changes a double.
inline constexpr Accuracy kFullPrecision{std::numeric_limits<double>::epsilon() / 2, 10'000};

namespace detail {

inline void require_positive_load(double b, const char* fn) {
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw std::invalid_argument(std::string(fn) + ": load b must be finite and > 0");
  }
}

// Stirling-series remainder: ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)].
// Small arguments come from a table (Loader 2000); larger ones from the
// truncated asymptotic series, which is accurate to double precision there.
inline double stirling_error(std::uint64_t n) {
  static constexpr std::array<double, 16> kTable = {
      0.0,  // placeholder, n = 0 never reaches here
      0.0810614667953272582196702,   0.0413406959554092940938221,
      0.02767792568499833914878929,  0.02079067210376509311152277,
      0.01664469118982119216319487,  0.01387612882307074799874573,
      0.01189670994589177009505572,  0.010411265261972096497478567,
      0.009255462182712732917728637, 0.008330563433362871256469318,
      0.007573675487951840794972024, 0.006942840107209529865664152,
      0.006408994188004207068439631, 0.005951370112758847735624416,
      0.005554733551962801371038690,
  };
  if (n <= 15) return kTable[n];

  constexpr double s0 = 1.0 / 12.0;
  constexpr double s1 = 1.0 / 360.0;
  constexpr double s2 = 1.0 / 1260.0;
  constexpr double s3 = 1.0 / 1680.0;
  constexpr double s4 = 1.0 / 1188.0;
  const double x = static_cast<double>(n);
  const double xx = x * x;
  if (n > 500) return (s0 - s1 / xx) / x;
  if (n > 80) return (s0 - (s1 - s2 / xx) / xx) / x;
  if (n > 35) return (s0 - (s1 - (s2 - s3 / xx) / xx) / xx) / x;
  return (s0 - (s1 - (s2 - (s3 - s4 / xx) / xx) / xx) / xx) / x;
}

// Deviance term x ln(x/m) + m - x, evaluated without cancellation when x ~ m.
inline double deviance(double x, double m) {
  if (std::abs(x - m) < 0.1 * (x + m)) {
    double v = (x - m) / (x + m);
    double s = (x - m) * v;
    double ej = 2.0 * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * std::log(x / m) + m - x;
}

}  // namespace detail

/// ln(n!). Exact products up to 20!, Stirling with remainder beyond.
inline double log_factorial(std::uint64_t n) {
  if (n <= 1) return 0.0;
  if (n <= 20) {
    long double f = 1.0L;
    for (std::uint64_t k = 2; k <= n; ++k) f *= static_cast<long double>(k);
    return static_cast<double>(std::log(f));
  }
  const double x = static_cast<double>(n);
  return (x + 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) +
         detail::stirling_error(n);
}

/// Pr{N = n} for N ~ Poisson(b).
///
/// Uses Loader's saddle-point form exp(-stirling_error(n) - deviance(n, b)) /
/// sqrt(2 pi n), which equals exp(n ln b - b - ln n!) but keeps full relative
/// precision when n and b are large. Underflows gracefully to 0.
inline double poisson_pmf(std::uint64_t n, double b) {
  detail::require_positive_load(b, "poisson_pmf");
  if (n == 0) return std::exp(-b);
  const double x = static_cast<double>(n);
  return std::exp(-detail::stirling_error(n) - detail::deviance(x, b)) /
         std::sqrt(2.0 * std::numbers::pi * x);
}

namespace detail {

// Sums pmf(k, b) for k = c, c-1, ..., 0 using the downward recurrence
// pmf(k-1) = pmf(k) * k / b. Only used when b >= c + 1, where the terms
// shrink monotonically going down.
inline double poisson_lower_sum(std::uint64_t c, double b, const Accuracy& acc) {
  double term = poisson_pmf(c, b);
  CompensatedSum<double> sum(term);
  std::int64_t iter = 0;
  for (std::uint64_t k = c; k > 0; --k) {
    term *= static_cast<double>(k) / b;
    sum += term;
    if (term <= acc.rel_tol * sum.value()) return sum.value();
    if (++iter >= acc.max_iter) {
      throw NonConvergenceError("poisson_cdf: lower sum did not converge");
    }
  }
  return sum.value();
}

// Sums pmf(k, b) for k > c by the upward recurrence. Only used when
// b < c + 1, so the ratio b / (k + 1) stays below one.
inline double poisson_upper_sum(std::uint64_t c, double b, const Accuracy& acc) {
  double term = poisson_pmf(c + 1, b);
  CompensatedSum<double> sum(term);
  if (term == 0.0) return 0.0;
  for (std::int64_t i = 0; i < acc.max_iter; ++i) {
    const double k = static_cast<double>(c + 2) + static_cast<double>(i);
    const double ratio = b / k;
    term *= ratio;
    sum += term;
    // Remaining terms are bounded by a geometric series in `ratio`.
    if (term * ratio / (1.0 - ratio) <= acc.rel_tol * sum.value()) return sum.value();
  }
  throw NonConvergenceError("poisson_cdf: upper sum did not converge");
}

}  // namespace detail

/// Pr{N <= c} for N ~ Poisson(b), i.e. the regularized upper incomplete gamma
/// Q(c + 1, b) = Gamma(c + 1, b) / c!.
///
/// The smaller of the two tails is summed directly and the other obtained by
/// complement, so neither tail loses relative precision where it is small.
inline double poisson_cdf(std::uint64_t c, double b, const Accuracy& acc = kFullPrecision) {
  detail::require_positive_load(b, "poisson_cdf");
  if (b < static_cast<double>(c) + 1.0) {
    return 1.0 - detail::poisson_upper_sum(c, b, acc);
  }
  return detail::poisson_lower_sum(c, b, acc);
}

/// Pr{N > c} for N ~ Poisson(b), the regularized lower incomplete gamma
/// P(c + 1, b).
inline double poisson_sf(std::uint64_t c, double b, const Accuracy& acc = kFullPrecision) {
  detail::require_positive_load(b, "poisson_sf");
  if (b < static_cast<double>(c) + 1.0) {
    return detail::poisson_upper_sum(c, b, acc);
  }
  return 1.0 - detail::poisson_lower_sum(c, b, acc);
}

namespace detail {

// sum_{k>=1} x^k / (k k!), the part of Ei(x) beyond gamma + ln x.
inline double ei_series_tail(double x, const Accuracy& acc) {
  double power_over_fact = 1.0;
  CompensatedSum<double> sum;
  for (std::int64_t k = 1; k <= acc.max_iter; ++k) {
    power_over_fact *= x / static_cast<double>(k);
    const double term = power_over_fact / static_cast<double>(k);
    sum += term;
    if (term <= acc.rel_tol * sum.value()) return sum.value();
  }
  throw NonConvergenceError("exp_integral_ei: ascending series exhausted max_iter at x = " +
                            std::to_string(x));
}

// e^{-x} Ei(x) ~ (1/x) sum_{k>=0} k! / x^k. The series diverges, so it is
// cut at the first term below tolerance; if the terms start growing before
// that, x is too small for this regime.
inline double ei_asymptotic_scaled(double x, const Accuracy& acc) {
  double term = 1.0;
  CompensatedSum<double> sum(1.0);
  for (std::int64_t k = 1; k <= acc.max_iter; ++k) {
    const double next = term * static_cast<double>(k) / x;
    if (next >= term) break;
    term = next;
    sum += term;
    if (term <= acc.rel_tol * sum.value()) return sum.value() / x;
  }
  throw NonConvergenceError("exp_integral_ei: asymptotic expansion cannot reach tolerance at x = " +
                            std::to_string(x));
}

}  // namespace detail

/// Ei(x) = PV integral of e^t / t from -inf to x, for x > 0.
///
/// x < 40: Ei(x) = gamma + ln x + sum_{k>=1} x^k / (k k!).
/// x >= 40: Ei(x) = (e^x / x) sum_{k>=0} k! / x^k, truncated at its smallest
/// term (about sqrt(2 pi x) e^{-x} relative, below 1e-16 at the switchover).
/// Overflows to +inf past x ~ 709.8; use exp_integral_ei_scaled there.
inline double exp_integral_ei(double x, const Accuracy& acc = {}) {
  acc.validate();
  if (!(x > 0.0)) throw std::invalid_argument("exp_integral_ei: x must be > 0");
  if (x < kEiSwitchover) {
    return kEulerGamma + std::log(x) + detail::ei_series_tail(x, acc);
  }
  return std::exp(x) * detail::ei_asymptotic_scaled(x, acc);
}

/// e^{-x} Ei(x); finite for every positive x.
inline double exp_integral_ei_scaled(double x, const Accuracy& acc = {}) {
  acc.validate();
  if (!(x > 0.0)) throw std::invalid_argument("exp_integral_ei_scaled: x must be > 0");
  if (x < kEiSwitchover) {
    return std::exp(-x) * (kEulerGamma + std::log(x) + detail::ei_series_tail(x, acc));
  }
  return detail::ei_asymptotic_scaled(x, acc);
}

}  // namespace sdnbs
