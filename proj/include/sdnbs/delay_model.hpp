#pragma once

// Expected per-packet processing delay at a base station whose flow table
// holds C rules while the number of attached users is Poisson(b), b = lambda_u * A.
//
// Given N users, a packet misses the table with probability (1 - C/N)^+ and
// then waits d_ctrl for the controller. The expectation over N is
//
//   E[Delay] / d_ctrl = Pr{N > C} - C * E_C(b),
//   E_C(b)            = sum_{k>C} b^k / (k k!) e^{-b},
//
// and E_C has the closed form
//
//   E_C(b) = [Ei(b) - gamma - ln b - sum_{k=1}^{C} b^k / (k k!)] e^{-b}.
//
// The closed form is fast for C << b but cancels catastrophically once the
// partial sum approaches Ei(b) - gamma - ln b; the direct series is cheap
// exactly there. expected_delay() picks between them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "sdnbs/compensated_sum.hpp"
#include "sdnbs/errors.hpp"
#include "sdnbs/specfun.hpp"

namespace sdnbs {

struct ModelParams {
  double lambda_u = 1e-3;      // users per m^2
  double area = 1e4;           // m^2
  std::uint64_t capacity = 10; // rules
  double d_ctrl = 1.0;         // seconds

  /// Expected number of users in the cell.
  [[nodiscard]] double load() const { return lambda_u * area; }

  /// Checks the type invariants. A load that underflows to zero is accepted;
  /// the hybrid evaluator maps it to zero delay.
  void validate() const {
    if (!(lambda_u > 0.0) || !std::isfinite(lambda_u)) {
      throw std::invalid_argument("lambda_u must be finite and > 0");
    }
    if (!(area > 0.0) || !std::isfinite(area)) {
      throw std::invalid_argument("area must be finite and > 0");
    }
    if (!(d_ctrl >= 0.0) || !std::isfinite(d_ctrl)) {
      throw std::invalid_argument("d_ctrl must be finite and >= 0");
    }
    if (!std::isfinite(load())) throw std::invalid_argument("lambda_u * area overflows");
  }
};

struct SeriesOptions {
  double rel_tol = 1e-12;
  std::int64_t max_terms = 2'000'000;

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol < 1e-3)) {
      throw std::invalid_argument("SeriesOptions.rel_tol must lie in (0, 1e-3)");
    }
    if (max_terms < 1) throw std::invalid_argument("SeriesOptions.max_terms must be >= 1");
  }
};

enum class Method { direct_series, closed_form, hybrid };

/// Which integration constant the closed form uses.
///  - corrected: the value fixed by E_C(0) = 0, i.e. bracket Ei(b) - gamma - ln b - sum.
///  - paper_literal: the published constant, bracket Ei(b) - Ei(1) - ln b - sum - 1.
///    It does not satisfy the boundary condition and is kept for comparison only.
enum class ConstantMode { corrected, paper_literal };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::direct_series: return "direct_series";
    case Method::closed_form: return "closed_form";
    case Method::hybrid: return "hybrid";
  }
  return "unknown";
}

inline std::string_view to_string(ConstantMode m) {
  return m == ConstantMode::corrected ? "corrected" : "paper_literal";
}

struct DelayResult {
  double normalized = 0.0;  // E[Delay] / d_ctrl
  double absolute = 0.0;    // seconds
  Method method = Method::direct_series;
  double error_bound = 0.0; // bound on the truncation error of `normalized`
  ConstantMode constant_mode = ConstantMode::corrected;
};

/// Relative size below which a closed-form bracket is considered to have lost
/// too many digits. Absolute rounding error in the bracket is a few ulps of
/// its largest term, so this leaves roughly 1e-11 relative accuracy.
inline constexpr double kCancellationThreshold = 1e-5;

/// Delay of a single packet given n users: (1 - C/n) d_ctrl when the table
/// overflows, zero otherwise.
inline double per_packet_delay(std::uint64_t n, std::uint64_t capacity, double d_ctrl) {
  if (n <= capacity) return 0.0;
  return (static_cast<double>(n - capacity) / static_cast<double>(n)) * d_ctrl;
}

namespace detail {

struct TailSum {
  double value = 0.0;
  double error_bound = 0.0;
};

// sum_{n >= first} weight(n) pmf(n, b) with 0 <= weight(n) <= weight_cap(n).
// Summation runs unconditionally until n + 2 > 2b; from there the remaining
// mass is bounded by pmf(n+1) / (1 - b/(n+2)), a geometric majorant because
// pmf(k+1)/pmf(k) = b/(k+1) decreases in k.
template <typename Weight, typename WeightCap>
TailSum poisson_weighted_tail(double b, std::uint64_t first, const SeriesOptions& opts,
                              Weight weight, WeightCap weight_cap, const char* fn) {
  opts.validate();
  CompensatedSum<double> sum;
  double next_pmf = poisson_pmf(first, b);
  for (std::int64_t i = 0; i < opts.max_terms; ++i) {
    const std::uint64_t n = first + static_cast<std::uint64_t>(i);
    const double pmf = next_pmf;
    sum += weight(n) * pmf;
    next_pmf = poisson_pmf(n + 1, b);
    const double nd = static_cast<double>(n);
    if (nd + 2.0 > 2.0 * b) {
      const double bound = weight_cap(n + 1) * next_pmf / (1.0 - b / (nd + 2.0));
      if (bound <= opts.rel_tol * sum.value()) return {sum.value(), bound};
    }
  }
  throw NonConvergenceError(std::string(fn) + ": max_terms reached before the tail bound closed (b = " +
                            std::to_string(b) + ")");
}

}  // namespace detail

/// E_C(b) by direct summation of its defining series.
inline double ec_tail_direct(double b, std::uint64_t capacity, const SeriesOptions& opts = {}) {
  detail::require_positive_load(b, "ec_tail_direct");
  return detail::poisson_weighted_tail(
             b, capacity + 1, opts, [](std::uint64_t k) { return 1.0 / static_cast<double>(k); },
             [](std::uint64_t k) { return 1.0 / static_cast<double>(k); }, "ec_tail_direct")
      .value;
}

/// E[Delay] as the truncated series sum_{n>C} (1 - C/n) pmf(n, b) d_ctrl.
inline DelayResult expected_delay_direct(const ModelParams& params, const SeriesOptions& opts = {}) {
  params.validate();
  const double b = params.load();
  DelayResult r;
  r.method = Method::direct_series;
  if (b == 0.0) return r;
  const std::uint64_t c = params.capacity;
  const auto tail = detail::poisson_weighted_tail(
      b, c + 1, opts,
      [c](std::uint64_t n) { return static_cast<double>(n - c) / static_cast<double>(n); },
      [](std::uint64_t) { return 1.0; }, "expected_delay_direct");
  r.normalized = tail.value;
  r.error_bound = tail.error_bound;
  r.absolute = r.normalized * params.d_ctrl;
  return r;
}

/// The pieces of the closed-form bracket, each already multiplied by e^{-b}.
struct ClosedFormBracket {
  double ei_scaled = 0.0;     // e^{-b} Ei(b)
  double constant = 0.0;      // e^{-b} * (integration constant terms)
  double log_term = 0.0;      // e^{-b} ln b
  double partial_sum = 0.0;   // sum_{k=1}^{C} b^k / (k k!) e^{-b}
  double value = 0.0;         // the bracket times e^{-b}, i.e. E_C(b)
  double largest_term = 0.0;
};

/// Assembles the closed-form bracket without checking for cancellation.
inline ClosedFormBracket ec_closed_terms(double b, std::uint64_t capacity, ConstantMode mode) {
  detail::require_positive_load(b, "ec_closed");
  ClosedFormBracket t;
  const double scale = std::exp(-b);
  t.ei_scaled = exp_integral_ei_scaled(b, kFullPrecision);
  // corrected: -gamma; paper_literal: -Ei(1) - 1.
  t.constant = mode == ConstantMode::corrected ? -kEulerGamma * scale : -(kEi1 + 1.0) * scale;
  t.log_term = std::log(b) * scale;

  CompensatedSum<double> partial;
  for (std::uint64_t k = 1; k <= capacity; ++k) {
    partial += poisson_pmf(k, b) / static_cast<double>(k);
  }
  t.partial_sum = partial.value();

  CompensatedSum<double> bracket(t.ei_scaled);
  bracket += t.constant;
  bracket -= t.log_term;
  bracket -= t.partial_sum;
  t.value = bracket.value();
  t.largest_term = std::max({std::abs(t.ei_scaled), std::abs(t.constant), std::abs(t.log_term),
                             t.partial_sum});
  return t;
}

/// E_C(b) from the closed form. In corrected mode, throws CancellationError
/// when the bracket is smaller than kCancellationThreshold times its largest
/// term. The literal constant does not approximate E_C at all, so its value is
/// returned as computed (absolute error stays at a few ulps of the largest term).
inline double ec_closed(double b, std::uint64_t capacity, ConstantMode mode = ConstantMode::corrected) {
  const auto t = ec_closed_terms(b, capacity, mode);
  if (mode == ConstantMode::corrected && std::abs(t.value) < kCancellationThreshold * t.largest_term) {
    throw CancellationError("ec_closed: bracket cancels (b = " + std::to_string(b) +
                                ", C = " + std::to_string(capacity) + ")",
                            t.value, t.largest_term);
  }
  return t.value;
}

/// E[Delay] = [Pr{N > C} - C E_C(b)] d_ctrl with E_C from the closed form.
///
/// In corrected mode the final subtraction is checked like the bracket: when
/// C >> b the two terms agree to many digits and the result would inherit the
/// bracket's rounding error amplified by their ratio. Literal mode is never
/// checked (see ec_closed).
inline DelayResult expected_delay_closed(const ModelParams& params,
                                         ConstantMode mode = ConstantMode::corrected) {
  params.validate();
  const double b = params.load();
  DelayResult r;
  r.method = Method::closed_form;
  r.constant_mode = mode;
  if (b == 0.0) return r;
  const double c = static_cast<double>(params.capacity);
  const double overflow_prob = poisson_sf(params.capacity, b);
  if (params.capacity == 0) {
    r.normalized = overflow_prob;
  } else {
    const auto t = ec_closed_terms(b, params.capacity, mode);
    const double rounding = t.largest_term * c;
    const double normalized = overflow_prob - c * t.value;
    if (mode == ConstantMode::corrected &&
        (std::abs(t.value) < kCancellationThreshold * t.largest_term ||
         std::abs(normalized) < kCancellationThreshold * rounding)) {
      throw CancellationError("expected_delay_closed: closed form cancels (b = " +
                                  std::to_string(b) + ", C = " + std::to_string(params.capacity) + ")",
                              normalized, rounding);
    }
    r.normalized = normalized;
  }
  if (mode == ConstantMode::corrected) r.normalized = std::clamp(r.normalized, 0.0, 1.0);
  r.absolute = r.normalized * params.d_ctrl;
  return r;
}

/// Closed form with the corrected constant, falling back to the direct series
/// wherever the closed form signals cancellation. `method` reports which path
/// produced the value.
inline DelayResult expected_delay_closed_or_direct(const ModelParams& params,
                                                   const SeriesOptions& opts = {}) {
  try {
    return expected_delay_closed(params, ConstantMode::corrected);
  } catch (const CancellationError&) {
    return expected_delay_direct(params, opts);
  }
}

/// True when the hybrid evaluator uses the closed form: C + 1 <= b - 10 sqrt(b).
inline bool prefers_closed_form(double b, std::uint64_t capacity) {
  return static_cast<double>(capacity) + 1.0 <= b - 10.0 * std::sqrt(b);
}

/// Hybrid evaluator. Closed form (corrected constant) deep in the overload
/// regime, direct series elsewhere; the series converges geometrically as soon
/// as C + 1 > b, and the closed form needs only O(C) terms when C << b.
inline DelayResult expected_delay(const ModelParams& params, const SeriesOptions& opts = {}) {
  params.validate();
  opts.validate();
  DelayResult r;
  const double b = params.load();
  if (b == 0.0) {
    r.method = Method::hybrid;
    return r;
  }
  if (prefers_closed_form(b, params.capacity)) {
    r = expected_delay_closed_or_direct(params, opts);
  } else {
    r = expected_delay_direct(params, opts);
  }
  r.method = Method::hybrid;
  r.constant_mode = ConstantMode::corrected;
  r.normalized = std::clamp(r.normalized, 0.0, 1.0);
  r.absolute = r.normalized * params.d_ctrl;
  return r;
}

}  // namespace sdnbs
