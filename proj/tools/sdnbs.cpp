// Command-line front end for the flow-table delay model.
//
//   sdnbs eval           --area 1e4 --capacity 10
//   sdnbs sweep-area     (area sweep, one curve per capacity)
//   sdnbs sweep-capacity (C = lambda_u * A)
//   sdnbs simulate       --slots 1000000 --seed 7
//   sdnbs validate
//
// Exit codes: 0 ok, 1 invalid arguments, 2 numeric failure, 3 validation
// failure, 4 I/O error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdnbs/delay_model.hpp"
#include "sdnbs/output.hpp"
#include "sdnbs/simulator.hpp"
#include "sdnbs/sweep.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kInvalidArguments = 1,
  kNumericFailure = 2,
  kValidationFailure = 3,
  kIoError = 4,
};

struct Flags {
  std::optional<double> lambda_u;
  std::optional<double> area;
  std::vector<std::uint64_t> capacities;
  std::optional<double> d_ctrl;
  std::optional<double> area_min;
  std::optional<double> area_max;
  std::optional<std::int64_t> points;
  std::optional<bool> log_spacing;
  std::optional<std::uint64_t> c_min;
  std::optional<std::uint64_t> c_max;
  std::optional<std::uint64_t> c_step;
  std::optional<std::uint64_t> slots;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> estimator;
  std::optional<double> rel_tol;
  std::optional<std::string> constant_mode;
  std::string out_dir = "out";
  std::optional<std::string> config;
  bool no_plot = false;
  unsigned threads = 0;
};

void add_common_options(CLI::App& cmd, Flags& f) {
  cmd.add_option("--lambda-u", f.lambda_u, "User density (users per m^2)");
  cmd.add_option("--area", f.area, "Cell area in m^2 (eval, simulate)");
  cmd.add_option("--capacity", f.capacities, "Flow-table capacity; repeatable")->allow_extra_args(false);
  cmd.add_option("--d-ctrl", f.d_ctrl, "Controller fetch delay in seconds (default 1 = normalized)");
  cmd.add_option("--area-min", f.area_min, "Smallest area of the sweep grid");
  cmd.add_option("--area-max", f.area_max, "Largest area of the sweep grid");
  cmd.add_option("--points", f.points, "Number of area grid points");
  cmd.add_flag("--log,!--no-log", f.log_spacing, "Log-spaced (default) or linear area grid");
  cmd.add_option("--c-min", f.c_min, "Smallest capacity of the matched sweep");
  cmd.add_option("--c-max", f.c_max, "Largest capacity of the matched sweep");
  cmd.add_option("--c-step", f.c_step, "Capacity step of the matched sweep");
  cmd.add_option("--slots", f.slots, "Monte Carlo slots");
  cmd.add_option("--seed", f.seed, "Monte Carlo seed");
  cmd.add_option("--estimator", f.estimator, "Monte Carlo estimator")
      ->check(CLI::IsMember({"packet-level", "conditional"}));
  cmd.add_option("--rel-tol", f.rel_tol, "Relative tolerance for series truncation");
  cmd.add_option("--constant-mode", f.constant_mode, "Integration constant of the closed form")
      ->check(CLI::IsMember({"corrected", "paper-literal"}));
  cmd.add_option("--out-dir", f.out_dir, "Output directory")->capture_default_str();
  cmd.add_option("--config", f.config, "JSON config file; flags override its values");
  cmd.add_flag("--no-plot", f.no_plot, "Skip the SVG plot");
  cmd.add_option("--threads", f.threads, "Worker threads for Monte Carlo (0 = all cores)");
}

sdnbs::SweepSpec build_spec(sdnbs::Mode mode, const Flags& f) {
  sdnbs::SweepSpec spec;
  spec.mode = mode;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw sdnbs::SpecError("--config", "cannot read " + *f.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw sdnbs::SpecError("--config", e.what());
    }
    spec = sdnbs::spec_from_json(j, spec);
    if (spec.mode != mode) {
      throw sdnbs::SpecError("mode", "config file selects '" + std::string(to_string(spec.mode)) +
                                         "' but the subcommand is '" + std::string(to_string(mode)) + "'");
    }
  }
  if (f.lambda_u) spec.lambda_u = *f.lambda_u;
  if (f.area) spec.area = *f.area;
  if (!f.capacities.empty()) spec.capacities = f.capacities;
  if (f.d_ctrl) spec.d_ctrl = *f.d_ctrl;
  if (f.area_min) spec.area_grid.min = *f.area_min;
  if (f.area_max) spec.area_grid.max = *f.area_max;
  if (f.points) spec.area_grid.points = *f.points;
  if (f.log_spacing) spec.area_grid.spacing = *f.log_spacing ? sdnbs::Spacing::log : sdnbs::Spacing::linear;
  if (f.c_min) spec.capacity_grid.min = *f.c_min;
  if (f.c_max) spec.capacity_grid.max = *f.c_max;
  if (f.c_step) spec.capacity_grid.step = *f.c_step;
  if (f.slots || f.seed || f.estimator) {
    auto cfg = spec.sim_or_default();
    if (f.slots) cfg.slots = *f.slots;
    if (f.seed) cfg.seed = *f.seed;
    if (f.estimator) {
      cfg.estimator = *f.estimator == "conditional" ? sdnbs::Estimator::conditional
                                                    : sdnbs::Estimator::packet_level;
    }
    spec.sim = cfg;
  }
  if (f.rel_tol) spec.tolerance.rel_tol = *f.rel_tol;
  if (f.constant_mode) {
    spec.constant_mode =
        *f.constant_mode == "paper-literal" ? sdnbs::ConstantMode::paper_literal : sdnbs::ConstantMode::corrected;
  }
  spec.validate();
  return spec;
}

void print_rows(const std::vector<sdnbs::OutputRow>& rows) {
  for (const auto& r : rows) {
    std::printf("b=%-12.6g C=%-6llu normalized=%.12g absolute=%.12g method=%s", r.b,
                static_cast<unsigned long long>(r.capacity), r.normalized_delay, r.absolute_delay,
                r.method.c_str());
    if (r.mc_mean) std::printf(" mc_mean=%.12g mc_stderr=%.3g", *r.mc_mean, *r.mc_stderr);
    std::printf("\n");
  }
}

int run(sdnbs::Mode mode, const Flags& f) {
  using namespace sdnbs;
  const SweepSpec spec = build_spec(mode, f);
  EmitOptions opts;
  opts.plot = !f.no_plot;
  std::vector<OutputRow> rows;
  std::optional<ValidationReport> report;

  switch (mode) {
    case Mode::eval:
      rows = run_eval(spec);
      opts.basename = "eval";
      opts.plot = false;
      break;
    case Mode::sweep_area:
      rows = run_sweep_area(spec);
      opts.basename = "sweep_area";
      opts.plot_axis = PlotAxis::area;
      opts.plot_title = "Expected packet delay vs cell area (lambda_u = " + format_double(spec.lambda_u) + ")";
      break;
    case Mode::sweep_matched_capacity:
      rows = run_sweep_matched_capacity(spec);
      opts.basename = "sweep_capacity";
      opts.plot_axis = PlotAxis::capacity;
      opts.plot_title = "Expected packet delay vs flow-table capacity (C = E[N])";
      break;
    case Mode::simulate:
      rows = run_simulate(spec, f.threads);
      opts.basename = "simulate";
      opts.plot = false;
      break;
    case Mode::validate: {
      auto v = run_validate(spec, f.threads);
      rows = std::move(v.rows);
      report = std::move(v.report);
      opts.basename = "validate";
      opts.plot = false;
      break;
    }
  }

  const auto files = emit_outputs(rows, report ? &*report : nullptr, f.out_dir, spec, opts);
  if (mode == Mode::eval || mode == Mode::simulate) print_rows(rows);
  for (const auto& p : files) std::printf("wrote %s\n", p.string().c_str());

  if (report) {
    std::printf("closed form vs direct series: max rel deviation %.3g (limit %.0e) %s\n",
                report->max_closed_rel_deviation, kClosedFormTolerance,
                report->closed_form_ok() ? "PASS" : "FAIL");
    std::printf("monte carlo vs analytic:      max |z| %.3f (limit %.0f) %s\n", report->max_monte_carlo_z,
                kMonteCarloMaxZ, report->monte_carlo_ok() ? "PASS" : "FAIL");
    for (const auto& e : report->literal) {
      if (e.b == 1.0 && e.capacity == 10) {
        std::printf("literal constant at b=1, C=10: %.6g (corrected %.6g)\n", e.paper_literal, e.corrected);
      }
    }
    if (!report->passed()) return kValidationFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expected packet-processing delay of a capacity-limited base-station flow table"};
  app.require_subcommand(1, 1);
  Flags flags;

  struct Sub {
    const char* name;
    const char* help;
    sdnbs::Mode mode;
  };
  const Sub subs[] = {
      {"eval", "Evaluate the expected delay at one area for each capacity", sdnbs::Mode::eval},
      {"sweep-area", "Sweep cell area for fixed capacities", sdnbs::Mode::sweep_area},
      {"sweep-capacity", "Sweep capacity with C = lambda_u * A", sdnbs::Mode::sweep_matched_capacity},
      {"simulate", "Monte Carlo estimate next to the analytic value", sdnbs::Mode::simulate},
      {"validate", "Cross-check closed form, direct series and Monte Carlo", sdnbs::Mode::validate},
  };
  std::vector<std::pair<CLI::App*, sdnbs::Mode>> commands;
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common_options(*cmd, flags);
    commands.emplace_back(cmd, s.mode);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidArguments;
  }

  try {
    for (const auto& [cmd, mode] : commands) {
      if (cmd->parsed()) return run(mode, flags);
    }
    return kInvalidArguments;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalidArguments;
  } catch (const sdnbs::NonConvergenceError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kNumericFailure;
  } catch (const sdnbs::CancellationError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kNumericFailure;
  } catch (const sdnbs::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIoError;
  }
}
