#pragma once

// Sweep definitions and runners behind the command-line tool: single-point
// evaluation, the area sweep at fixed capacities, the matched-capacity sweep
// (C = lambda_u * A), Monte Carlo runs, and the analytic/Monte Carlo
// validation report.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sdnbs/delay_model.hpp"
#include "sdnbs/errors.hpp"
#include "sdnbs/simulator.hpp"
#include "sdnbs/specfun.hpp"

namespace sdnbs {

/// Invalid sweep definition; `field()` names the offending field.
class SpecError : public std::invalid_argument {
 public:
  SpecError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Mode { eval, sweep_area, sweep_matched_capacity, simulate, validate };
enum class Spacing { linear, log };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::eval: return "eval";
    case Mode::sweep_area: return "sweep_area";
    case Mode::sweep_matched_capacity: return "sweep_matched_capacity";
    case Mode::simulate: return "simulate";
    case Mode::validate: return "validate";
  }
  return "unknown";
}

inline std::string_view to_string(Spacing s) { return s == Spacing::log ? "log" : "linear"; }

struct AreaGrid {
  double min = 1e3;
  double max = 1e6;
  std::int64_t points = 60;
  Spacing spacing = Spacing::log;

  /// Grid values; endpoints are exact.
  std::vector<double> values() const {
    std::vector<double> v(static_cast<std::size_t>(points));
    const auto last = static_cast<double>(points - 1);
    for (std::int64_t i = 0; i < points; ++i) {
      const double t = static_cast<double>(i) / last;
      v[static_cast<std::size_t>(i)] =
          spacing == Spacing::log ? std::exp(std::log(min) + t * (std::log(max) - std::log(min)))
                                  : min + t * (max - min);
    }
    v.front() = min;
    v.back() = max;
    return v;
  }
};

struct CapacityGrid {
  std::uint64_t min = 1;
  std::uint64_t max = 100;
  std::uint64_t step = 1;

  std::vector<std::uint64_t> values() const {
    std::vector<std::uint64_t> v;
    for (std::uint64_t c = min; c <= max; c += step) v.push_back(c);
    return v;
  }
};

struct SweepSpec {
  Mode mode = Mode::eval;
  double lambda_u = 1e-3;
  double d_ctrl = 1.0;
  double area = 1e4;  // single-point modes (eval, simulate)
  std::vector<std::uint64_t> capacities{10, 50, 100};
  AreaGrid area_grid;
  CapacityGrid capacity_grid;
  std::optional<SimConfig> sim;
  SeriesOptions tolerance;
  ConstantMode constant_mode = ConstantMode::corrected;

  void validate() const {
    if (!(lambda_u > 0.0) || !std::isfinite(lambda_u)) throw SpecError("lambda_u", "must be finite and > 0");
    if (!(d_ctrl >= 0.0) || !std::isfinite(d_ctrl)) throw SpecError("d_ctrl", "must be finite and >= 0");
    if (!(tolerance.rel_tol > 0.0 && tolerance.rel_tol < 1e-3)) {
      throw SpecError("tolerance.rel_tol", "must lie in (0, 1e-3)");
    }
    if (tolerance.max_terms < 1) throw SpecError("tolerance.max_terms", "must be >= 1");
    if (sim && sim->slots < 1) throw SpecError("sim.slots", "must be >= 1");
    switch (mode) {
      case Mode::eval:
      case Mode::simulate:
        if (!(area > 0.0) || !std::isfinite(area)) throw SpecError("area", "must be finite and > 0");
        if (capacities.empty()) throw SpecError("capacities", "must not be empty");
        break;
      case Mode::sweep_area:
        if (capacities.empty()) throw SpecError("capacities", "must not be empty");
        if (!(area_grid.min > 0.0) || !std::isfinite(area_grid.max)) {
          throw SpecError("area_grid.min", "must be > 0 with a finite max");
        }
        if (!(area_grid.min < area_grid.max)) throw SpecError("area_grid.max", "must exceed area_grid.min");
        if (area_grid.points < 2) throw SpecError("area_grid.points", "must be >= 2");
        break;
      case Mode::sweep_matched_capacity:
        if (capacity_grid.min < 1) throw SpecError("capacity_grid.min", "must be >= 1 (b = C must be > 0)");
        if (!(capacity_grid.min < capacity_grid.max)) {
          throw SpecError("capacity_grid.max", "must exceed capacity_grid.min");
        }
        if (capacity_grid.step < 1) throw SpecError("capacity_grid.step", "must be >= 1");
        break;
      case Mode::validate:
        break;
    }
  }

  SimConfig sim_or_default() const { return sim.value_or(SimConfig{}); }
};

struct OutputRow {
  double lambda_u = 0.0;
  double area_m2 = 0.0;
  double b = 0.0;
  std::uint64_t capacity = 0;
  double normalized_delay = 0.0;
  double absolute_delay = 0.0;
  std::string method;
  double error_bound = 0.0;
  std::optional<double> mc_mean;
  std::optional<double> mc_stderr;
};

/// Sort key for emitted rows.
inline bool row_less(const OutputRow& a, const OutputRow& b) {
  return std::pair(a.capacity, a.area_m2) < std::pair(b.capacity, b.area_m2);
}

// ---------------------------------------------------------------------------
// JSON config

namespace detail {

template <typename Enum, std::size_t N>
Enum parse_enum(const nlohmann::json& j, const std::string& field,
                const std::array<std::pair<std::string_view, Enum>, N>& names) {
  if (!j.is_string()) throw SpecError(field, "must be a string");
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : names) {
    if (s == name) return value;
  }
  throw SpecError(field, "unknown value '" + s + "'");
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& prefix,
                                std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw SpecError(prefix.empty() ? "config" : prefix, "must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw SpecError(prefix.empty() ? key : prefix + "." + key, "unknown field");
    }
  }
}

template <typename T>
T get_number(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) throw SpecError(field, "must be a number");
  if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) throw SpecError(field, "must be a nonnegative integer");
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) throw SpecError(field, "must be an integer");
  }
  return j.get<T>();
}

inline constexpr std::array<std::pair<std::string_view, Mode>, 5> kModeNames{{
    {"eval", Mode::eval},
    {"sweep_area", Mode::sweep_area},
    {"sweep_matched_capacity", Mode::sweep_matched_capacity},
    {"simulate", Mode::simulate},
    {"validate", Mode::validate},
}};
inline constexpr std::array<std::pair<std::string_view, Spacing>, 2> kSpacingNames{{
    {"linear", Spacing::linear},
    {"log", Spacing::log},
}};
inline constexpr std::array<std::pair<std::string_view, Estimator>, 2> kEstimatorNames{{
    {"packet_level", Estimator::packet_level},
    {"conditional", Estimator::conditional},
}};
inline constexpr std::array<std::pair<std::string_view, ConstantMode>, 2> kConstantModeNames{{
    {"corrected", ConstantMode::corrected},
    {"paper_literal", ConstantMode::paper_literal},
}};

}  // namespace detail

inline Mode parse_mode(std::string_view s) {
  return detail::parse_enum(nlohmann::json(std::string(s)), "mode", detail::kModeNames);
}

/// Reads a SweepSpec from a JSON object whose keys mirror the struct fields.
/// Fields that are absent keep their defaults; unknown keys are rejected.
inline SweepSpec spec_from_json(const nlohmann::json& j, SweepSpec spec = {}) {
  using detail::get_number;
  detail::reject_unknown_keys(j, "", {"mode", "lambda_u", "d_ctrl", "area", "capacities", "area_grid",
                                      "capacity_grid", "sim", "tolerance", "constant_mode"});
  if (j.contains("mode")) spec.mode = detail::parse_enum(j["mode"], "mode", detail::kModeNames);
  if (j.contains("lambda_u")) spec.lambda_u = get_number<double>(j["lambda_u"], "lambda_u");
  if (j.contains("d_ctrl")) spec.d_ctrl = get_number<double>(j["d_ctrl"], "d_ctrl");
  if (j.contains("area")) spec.area = get_number<double>(j["area"], "area");
  if (j.contains("capacities")) {
    if (!j["capacities"].is_array()) throw SpecError("capacities", "must be an array");
    spec.capacities.clear();
    for (const auto& c : j["capacities"]) {
      spec.capacities.push_back(get_number<std::uint64_t>(c, "capacities"));
    }
  }
  if (j.contains("area_grid")) {
    const auto& g = j["area_grid"];
    detail::reject_unknown_keys(g, "area_grid", {"min", "max", "points", "spacing"});
    if (g.contains("min")) spec.area_grid.min = get_number<double>(g["min"], "area_grid.min");
    if (g.contains("max")) spec.area_grid.max = get_number<double>(g["max"], "area_grid.max");
    if (g.contains("points")) spec.area_grid.points = get_number<std::int64_t>(g["points"], "area_grid.points");
    if (g.contains("spacing")) {
      spec.area_grid.spacing = detail::parse_enum(g["spacing"], "area_grid.spacing", detail::kSpacingNames);
    }
  }
  if (j.contains("capacity_grid")) {
    const auto& g = j["capacity_grid"];
    detail::reject_unknown_keys(g, "capacity_grid", {"min", "max", "step"});
    if (g.contains("min")) spec.capacity_grid.min = get_number<std::uint64_t>(g["min"], "capacity_grid.min");
    if (g.contains("max")) spec.capacity_grid.max = get_number<std::uint64_t>(g["max"], "capacity_grid.max");
    if (g.contains("step")) spec.capacity_grid.step = get_number<std::uint64_t>(g["step"], "capacity_grid.step");
  }
  if (j.contains("sim")) {
    const auto& s = j["sim"];
    detail::reject_unknown_keys(s, "sim", {"slots", "seed", "estimator"});
    SimConfig cfg = spec.sim_or_default();
    if (s.contains("slots")) cfg.slots = get_number<std::uint64_t>(s["slots"], "sim.slots");
    if (s.contains("seed")) cfg.seed = get_number<std::uint64_t>(s["seed"], "sim.seed");
    if (s.contains("estimator")) {
      cfg.estimator = detail::parse_enum(s["estimator"], "sim.estimator", detail::kEstimatorNames);
    }
    spec.sim = cfg;
  }
  if (j.contains("tolerance")) {
    const auto& t = j["tolerance"];
    detail::reject_unknown_keys(t, "tolerance", {"rel_tol", "max_terms"});
    if (t.contains("rel_tol")) spec.tolerance.rel_tol = get_number<double>(t["rel_tol"], "tolerance.rel_tol");
    if (t.contains("max_terms")) {
      spec.tolerance.max_terms = get_number<std::int64_t>(t["max_terms"], "tolerance.max_terms");
    }
  }
  if (j.contains("constant_mode")) {
    spec.constant_mode = detail::parse_enum(j["constant_mode"], "constant_mode", detail::kConstantModeNames);
  }
  return spec;
}

inline nlohmann::ordered_json spec_to_json(const SweepSpec& spec) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(spec.mode);
  j["lambda_u"] = spec.lambda_u;
  j["d_ctrl"] = spec.d_ctrl;
  j["area"] = spec.area;
  j["capacities"] = spec.capacities;
  j["area_grid"] = {{"min", spec.area_grid.min},
                    {"max", spec.area_grid.max},
                    {"points", spec.area_grid.points},
                    {"spacing", to_string(spec.area_grid.spacing)}};
  j["capacity_grid"] = {{"min", spec.capacity_grid.min},
                        {"max", spec.capacity_grid.max},
                        {"step", spec.capacity_grid.step}};
  if (spec.sim) {
    j["sim"] = {{"slots", spec.sim->slots},
                {"seed", spec.sim->seed},
                {"estimator", to_string(spec.sim->estimator)}};
  }
  j["tolerance"] = {{"rel_tol", spec.tolerance.rel_tol}, {"max_terms", spec.tolerance.max_terms}};
  j["constant_mode"] = to_string(spec.constant_mode);
  return j;
}

// ---------------------------------------------------------------------------
// Runners

namespace detail {

inline std::string describe_point(double b, std::uint64_t c) {
  return " [b = " + std::to_string(b) + ", C = " + std::to_string(c) + "]";
}

// Evaluates one grid point honoring the requested constant mode and attaches
// the failing (b, C) to numeric errors.
inline DelayResult evaluate_point(const SweepSpec& spec, const ModelParams& p) {
  try {
    if (spec.constant_mode == ConstantMode::paper_literal) {
      return expected_delay_closed(p, ConstantMode::paper_literal);
    }
    return expected_delay(p, spec.tolerance);
  } catch (const NonConvergenceError& e) {
    throw NonConvergenceError(e.what() + describe_point(p.load(), p.capacity));
  } catch (const CancellationError& e) {
    throw CancellationError(e.what() + describe_point(p.load(), p.capacity), e.bracket(),
                            e.largest_term());
  }
}

inline OutputRow make_row(const ModelParams& p, const DelayResult& r) {
  OutputRow row;
  row.lambda_u = p.lambda_u;
  row.area_m2 = p.area;
  row.b = p.load();
  row.capacity = p.capacity;
  row.normalized_delay = r.normalized;
  row.absolute_delay = r.normalized * p.d_ctrl;
  row.method = std::string(to_string(r.method));
  row.error_bound = r.error_bound;
  return row;
}

inline void require_mode(const SweepSpec& spec, Mode expected) {
  if (spec.mode != expected) {
    throw SpecError("mode", "expected '" + std::string(to_string(expected)) + "', got '" +
                                std::string(to_string(spec.mode)) + "'");
  }
  spec.validate();
}

}  // namespace detail

/// One row per capacity at `spec.area`.
inline std::vector<OutputRow> run_eval(const SweepSpec& spec) {
  detail::require_mode(spec, Mode::eval);
  std::vector<OutputRow> rows;
  for (const auto c : spec.capacities) {
    const ModelParams p{spec.lambda_u, spec.area, c, spec.d_ctrl};
    rows.push_back(detail::make_row(p, detail::evaluate_point(spec, p)));
  }
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

/// Expected delay against cell area for each capacity.
inline std::vector<OutputRow> run_sweep_area(const SweepSpec& spec) {
  detail::require_mode(spec, Mode::sweep_area);
  const auto areas = spec.area_grid.values();
  std::vector<OutputRow> rows;
  rows.reserve(areas.size() * spec.capacities.size());
  for (const auto c : spec.capacities) {
    for (const double a : areas) {
      const ModelParams p{spec.lambda_u, a, c, spec.d_ctrl};
      rows.push_back(detail::make_row(p, detail::evaluate_point(spec, p)));
    }
  }
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

/// Expected delay when the table is sized to the mean population, C = lambda_u * A.
inline std::vector<OutputRow> run_sweep_matched_capacity(const SweepSpec& spec) {
  detail::require_mode(spec, Mode::sweep_matched_capacity);
  std::vector<OutputRow> rows;
  for (const auto c : spec.capacity_grid.values()) {
    const ModelParams p{spec.lambda_u, static_cast<double>(c) / spec.lambda_u, c, spec.d_ctrl};
    rows.push_back(detail::make_row(p, detail::evaluate_point(spec, p)));
  }
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

/// Analytic value plus a Monte Carlo estimate for each capacity at `spec.area`.
inline std::vector<OutputRow> run_simulate(const SweepSpec& spec, unsigned threads = 0) {
  detail::require_mode(spec, Mode::simulate);
  const SimConfig cfg = spec.sim_or_default();
  std::vector<OutputRow> rows;
  for (const auto c : spec.capacities) {
    const ModelParams p{spec.lambda_u, spec.area, c, spec.d_ctrl};
    auto row = detail::make_row(p, detail::evaluate_point(spec, p));
    const auto est = estimate_expected_delay(p, cfg, threads);
    row.mc_mean = est.mean;
    row.mc_stderr = est.std_error;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

// ---------------------------------------------------------------------------
// Validation

/// Grid on which the closed form is checked against the direct series.
inline constexpr std::array<double, 8> kValidationLoads{0.01, 0.1, 1, 5, 10, 50, 100, 500};
inline constexpr std::array<std::uint64_t, 8> kValidationCapacities{0, 1, 2, 5, 10, 50, 100, 200};

/// (b, C) pairs checked against Monte Carlo; all have nonzero variance.
inline constexpr std::array<std::pair<double, std::uint64_t>, 10> kMonteCarloConfigs{{
    {0.5, 0}, {1, 1}, {2, 1}, {5, 2}, {5, 5}, {10, 5}, {10, 10}, {20, 15}, {50, 40}, {100, 90},
}};

inline constexpr double kClosedFormTolerance = 1e-9;
inline constexpr double kMonteCarloMaxZ = 4.0;

/// C (Ei(1) + 1 - gamma) e^{-b}: the amount by which the literal integration
/// constant inflates the normalized delay.
inline double literal_constant_excess(double b, std::uint64_t capacity) {
  return static_cast<double>(capacity) * (kEi1 + 1.0 - kEulerGamma) * std::exp(-b);
}

struct ValidationReport {
  struct GridEntry {
    double b;
    std::uint64_t capacity;
    double direct;
    double closed;
    std::string closed_path;  // "closed_form" or "fallback"
    double rel_deviation;
  };
  struct MonteCarloEntry {
    double b;
    std::uint64_t capacity;
    double analytic;
    SimEstimate estimate;
    double z;
  };
  struct LiteralEntry {
    double b;
    std::uint64_t capacity;
    double corrected;
    double paper_literal;
    double predicted_excess;
    bool out_of_range;
  };

  std::vector<GridEntry> grid;
  std::vector<MonteCarloEntry> monte_carlo;
  std::vector<LiteralEntry> literal;
  double max_closed_rel_deviation = 0.0;
  double max_monte_carlo_z = 0.0;
  SimConfig sim;

  bool closed_form_ok() const { return max_closed_rel_deviation <= kClosedFormTolerance; }
  bool monte_carlo_ok() const { return max_monte_carlo_z <= kMonteCarloMaxZ; }
  bool passed() const { return closed_form_ok() && monte_carlo_ok(); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["closed_vs_direct"] = {{"tolerance", kClosedFormTolerance},
                             {"max_rel_deviation", max_closed_rel_deviation},
                             {"pass", closed_form_ok()}};
    auto& g = j["closed_vs_direct"]["points"] = nlohmann::ordered_json::array();
    for (const auto& e : grid) {
      g.push_back({{"b", e.b},
                   {"capacity", e.capacity},
                   {"direct", e.direct},
                   {"closed", e.closed},
                   {"path", e.closed_path},
                   {"rel_deviation", e.rel_deviation}});
    }
    j["monte_carlo"] = {{"slots", sim.slots},
                        {"seed", sim.seed},
                        {"estimator", to_string(sim.estimator)},
                        {"max_z", kMonteCarloMaxZ},
                        {"max_abs_z", max_monte_carlo_z},
                        {"pass", monte_carlo_ok()}};
    auto& m = j["monte_carlo"]["points"] = nlohmann::ordered_json::array();
    for (const auto& e : monte_carlo) {
      m.push_back({{"b", e.b},
                   {"capacity", e.capacity},
                   {"analytic", e.analytic},
                   {"mc_mean", e.estimate.mean},
                   {"mc_stderr", e.estimate.std_error},
                   {"z", e.z}});
    }
    auto& l = j["constant_discrepancy"] = nlohmann::ordered_json::array();
    for (const auto& e : literal) {
      l.push_back({{"b", e.b},
                   {"capacity", e.capacity},
                   {"corrected", e.corrected},
                   {"paper_literal", e.paper_literal},
                   {"predicted_excess", e.predicted_excess},
                   {"out_of_range", e.out_of_range}});
    }
    j["pass"] = passed();
    return j;
  }
};

struct ValidationRun {
  ValidationReport report;
  std::vector<OutputRow> rows;  // the Monte Carlo points
};

/// Cross-checks the closed form against the direct series over the standard
/// grid, the analytic value against Monte Carlo, and tabulates the literal
/// integration constant against the corrected one.
inline ValidationRun run_validate(const SweepSpec& spec, unsigned threads = 0) {
  detail::require_mode(spec, Mode::validate);
  ValidationRun run;
  auto& rep = run.report;
  rep.sim = spec.sim_or_default();

  for (const double b : kValidationLoads) {
    for (const auto c : kValidationCapacities) {
      const ModelParams p{1.0, b, c, 1.0};
      try {
        const auto direct = expected_delay_direct(p, spec.tolerance);
        const auto closed = expected_delay_closed_or_direct(p, spec.tolerance);
        const double dev = direct.normalized != 0.0
                               ? std::abs(closed.normalized - direct.normalized) / direct.normalized
                               : (closed.normalized == 0.0 ? 0.0 : INFINITY);
        rep.grid.push_back({b, c, direct.normalized, closed.normalized,
                            closed.method == Method::closed_form ? "closed_form" : "fallback", dev});
        rep.max_closed_rel_deviation = std::max(rep.max_closed_rel_deviation, dev);

        const auto literal = expected_delay_closed(p, ConstantMode::paper_literal);
        rep.literal.push_back({b, c, closed.normalized, literal.normalized, literal_constant_excess(b, c),
                               literal.normalized > 1.0 || literal.normalized < 0.0});
      } catch (const NonConvergenceError& e) {
        throw NonConvergenceError(e.what() + detail::describe_point(b, c));
      }
    }
  }

  for (const auto& [b, c] : kMonteCarloConfigs) {
    const ModelParams p{spec.lambda_u, b / spec.lambda_u, c, spec.d_ctrl};
    const auto analytic = expected_delay(p, spec.tolerance);
    const auto est = estimate_expected_delay(p, rep.sim, threads);
    const double diff = std::abs(est.mean - analytic.normalized);
    const double z = est.std_error > 0.0 ? diff / est.std_error : (diff == 0.0 ? 0.0 : INFINITY);
    rep.monte_carlo.push_back({p.load(), c, analytic.normalized, est, z});
    rep.max_monte_carlo_z = std::max(rep.max_monte_carlo_z, z);

    auto row = detail::make_row(p, analytic);
    row.mc_mean = est.mean;
    row.mc_stderr = est.std_error;
    run.rows.push_back(std::move(row));
  }
  std::sort(run.rows.begin(), run.rows.end(), row_less);
  return run;
}

}  // namespace sdnbs
