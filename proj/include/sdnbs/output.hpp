#pragma once

// File emission for sweep results: CSV (the contractual output), an SVG line
// chart, and a JSON run manifest. Every file is written to a temporary
// sibling first and renamed into place, so a failed write leaves nothing
// behind.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "sdnbs/sweep.hpp"

namespace sdnbs {

inline constexpr std::string_view kVersion = "1.0.0";

inline constexpr std::string_view kCsvHeader =
    "lambda_u,area_m2,b,capacity,normalized_delay,absolute_delay,method,error_bound,mc_mean,mc_stderr";

class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& cause)
      : std::runtime_error(path.string() + ": " + cause), path_(path) {}

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Shortest-form-independent rendering with 17 significant digits.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string format_csv(std::vector<OutputRow> rows) {
  std::sort(rows.begin(), rows.end(), row_less);
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.lambda_u) + ',' + format_double(r.area_m2) + ',' + format_double(r.b) + ',' +
           std::to_string(r.capacity) + ',' + format_double(r.normalized_delay) + ',' +
           format_double(r.absolute_delay) + ',' + r.method + ',' + format_double(r.error_bound) + ',' +
           (r.mc_mean ? format_double(*r.mc_mean) : std::string()) + ',' +
           (r.mc_stderr ? format_double(*r.mc_stderr) : std::string()) + '\n';
  }
  return out;
}

namespace detail {

inline double parse_double_field(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Parses CSV text produced by format_csv.
inline std::vector<OutputRow> parse_csv(std::string_view text) {
  std::vector<OutputRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kCsvHeader) throw std::runtime_error("csv: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() != 10) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 10 fields");
    }
    OutputRow r;
    r.lambda_u = detail::parse_double_field(f[0], line_no);
    r.area_m2 = detail::parse_double_field(f[1], line_no);
    r.b = detail::parse_double_field(f[2], line_no);
    r.capacity = static_cast<std::uint64_t>(detail::parse_double_field(f[3], line_no));
    r.normalized_delay = detail::parse_double_field(f[4], line_no);
    r.absolute_delay = detail::parse_double_field(f[5], line_no);
    r.method = std::string(f[6]);
    r.error_bound = detail::parse_double_field(f[7], line_no);
    if (!f[8].empty()) r.mc_mean = detail::parse_double_field(f[8], line_no);
    if (!f[9].empty()) r.mc_stderr = detail::parse_double_field(f[9], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// SVG line chart

enum class PlotAxis { area, capacity };

/// One polyline per capacity (area sweeps, log-x) or a single curve against
/// capacity (matched-capacity sweeps).
inline std::string render_plot_svg(const std::vector<OutputRow>& rows, PlotAxis axis, std::string_view title) {
  constexpr double width = 720, height = 480;
  constexpr double left = 80, right = 160, top = 50, bottom = 70;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const bool log_x = axis == PlotAxis::area;

  std::map<std::uint64_t, std::vector<std::pair<double, double>>> curves;
  for (const auto& r : rows) {
    const std::uint64_t key = axis == PlotAxis::area ? r.capacity : 0;
    const double x = axis == PlotAxis::area ? r.area_m2 : static_cast<double>(r.capacity);
    curves[key].emplace_back(x, r.normalized_delay);
  }
  double x_min = INFINITY, x_max = -INFINITY, y_max = 0.0;
  for (const auto& [_, pts] : curves) {
    for (const auto& [x, y] : pts) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_max = std::max(y_max, y);
    }
  }
  if (curves.empty()) x_min = x_max = 1.0;
  if (y_max <= 0.0) y_max = 1.0;
  y_max = std::min(1.0, std::ceil(y_max * 10.0) / 10.0);
  auto tx = [&](double x) {
    double t = 0.5;
    if (x_max > x_min) {
      t = log_x ? (std::log10(x) - std::log10(x_min)) / (std::log10(x_max) - std::log10(x_min))
                : (x - x_min) / (x_max - x_min);
    }
    return left + t * plot_w;
  };
  auto ty = [&](double y) { return top + plot_h * (1.0 - y / y_max); };

  static constexpr std::array<std::string_view, 6> kColors{"#1f77b4", "#d62728", "#2ca02c",
                                                          "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << width / 2 << "\" y=\"25\" text-anchor=\"middle\" font-size=\"15\">" << title
    << "</text>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  // y ticks every 0.1 (or finer when the range is small)
  const double y_step = y_max > 0.5 ? 0.1 : y_max / 5.0;
  for (double y = 0.0; y <= y_max + 1e-12; y += y_step) {
    s << "<line x1=\"" << left - 4 << "\" y1=\"" << ty(y) << "\" x2=\"" << left << "\" y2=\"" << ty(y)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << left - 8 << "\" y=\"" << ty(y) + 4 << "\" text-anchor=\"end\">"
      << format_double(std::round(y * 1000.0) / 1000.0) << "</text>\n";
  }
  if (log_x) {
    for (double d = std::ceil(std::log10(x_min)); d <= std::floor(std::log10(x_max)); d += 1.0) {
      const double x = std::pow(10.0, d);
      s << "<line x1=\"" << tx(x) << "\" y1=\"" << top + plot_h << "\" x2=\"" << tx(x) << "\" y2=\""
        << top + plot_h + 4 << "\" stroke=\"black\"/>\n";
      s << "<text x=\"" << tx(x) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">1e"
        << static_cast<int>(d) << "</text>\n";
    }
  } else {
    for (int i = 0; i <= 5; ++i) {
      const double x = x_min + (x_max - x_min) * i / 5.0;
      s << "<line x1=\"" << tx(x) << "\" y1=\"" << top + plot_h << "\" x2=\"" << tx(x) << "\" y2=\""
        << top + plot_h + 4 << "\" stroke=\"black\"/>\n";
      s << "<text x=\"" << tx(x) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
        << format_double(std::round(x * 100.0) / 100.0) << "</text>\n";
    }
  }
  s << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 20 << "\" text-anchor=\"middle\">"
    << (axis == PlotAxis::area ? "Cell area A (m^2, log scale)" : "Flow table capacity C = E[N]")
    << "</text>\n";
  s << "<text transform=\"translate(20," << top + plot_h / 2
    << ") rotate(-90)\" text-anchor=\"middle\">Expected delay / d_ctrl</text>\n";

  std::size_t index = 0;
  for (const auto& [capacity, pts] : curves) {
    const auto color = kColors[index % kColors.size()];
    s << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) s << tx(x) << ',' << ty(y) << ' ';
    s << "\"/>\n";
    const double ly = top + 20 + 20 * static_cast<double>(index);
    s << "<line x1=\"" << left + plot_w + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + plot_w + 40
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << left + plot_w + 45 << "\" y=\"" << ly + 4 << "\">"
      << (axis == PlotAxis::area ? "C = " + std::to_string(capacity) : std::string("C = lambda_u A"))
      << "</text>\n";
    ++index;
  }
  s << "</svg>\n";
  return s.str();
}

// ---------------------------------------------------------------------------
// Files

/// Writes `content` to `path` via a temporary sibling and rename.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, std::string("cannot open for writing: ") + std::strerror(errno));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      const std::string cause = std::strerror(errno);
      out.close();
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError(path, "write failed: " + cause);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw IoError(path, "rename failed: " + ec.message());
  }
}

struct EmitOptions {
  std::string basename;  // file stem, e.g. "sweep_area"
  bool plot = true;
  PlotAxis plot_axis = PlotAxis::area;
  std::string plot_title;
};

/// Writes <basename>.csv, optionally <basename>.svg and report.json, and
/// manifest.json into `out_dir`. Returns the paths written. If any write
/// fails, files already written by this call are removed.
inline std::vector<std::filesystem::path> emit_outputs(const std::vector<OutputRow>& rows,
                                                       const ValidationReport* report,
                                                       const std::filesystem::path& out_dir,
                                                       const SweepSpec& spec, const EmitOptions& opts) {
  std::vector<std::filesystem::path> written;
  try {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError(out_dir, "cannot create directory: " + ec.message());

    auto put = [&](const std::string& name, std::string_view content) {
      const auto path = out_dir / name;
      write_file_atomic(path, content);
      written.push_back(path);
    };
    put(opts.basename + ".csv", format_csv(rows));
    if (opts.plot) {
      put(opts.basename + ".svg", render_plot_svg(rows, opts.plot_axis, opts.plot_title));
    }
    if (report != nullptr) put("report.json", report->to_json().dump(2) + "\n");

    nlohmann::ordered_json manifest;
    manifest["tool"] = "sdnbs";
    manifest["version"] = kVersion;
    manifest["compiler"] = __VERSION__;
    manifest["json_library"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                               std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                               std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    manifest["mode"] = to_string(spec.mode);
    manifest["seed"] = spec.sim ? nlohmann::ordered_json(spec.sim->seed) : nlohmann::ordered_json(nullptr);
    manifest["spec"] = spec_to_json(spec);
    manifest["rows"] = rows.size();
    auto& files = manifest["outputs"] = nlohmann::ordered_json::array();
    for (const auto& p : written) files.push_back(p.filename().string());
    put("manifest.json", manifest.dump(2) + "\n");
  } catch (...) {
    for (const auto& p : written) {
      std::error_code ignored;
      std::filesystem::remove(p, ignored);
    }
    throw;
  }
  return written;
}

}  // namespace sdnbs
