#pragma once

// Emitting results: rows.csv, summary.json, plot.svg, result.json (everything
// needed to re-emit the others) and runtime.json (wall time, threads; the only
// schedule-dependent file).

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "orbitmatch/experiments/config.hpp"
#include "orbitmatch/experiments/runner.hpp"

namespace orbitmatch::experiments {

/// Shortest round-trip decimal form; "inf"/"-inf"/"nan" otherwise.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string rows_csv(const ExperimentResult& res) {
  std::string out = "n,replica,statistic,exponent\n";
  for (const Row& r : res.rows) {
    out += std::to_string(r.n) + ',' + std::to_string(r.replica) + ',' + format_double(r.statistic) + ',' +
           format_double(r.exponent) + '\n';
  }
  return out;
}

namespace detail {

inline json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace detail

inline json summary_json(const ExperimentResult& res) {
  const ExperimentConfig& c = res.config;
  json s;
  s["kind"] = kind_name(c.kind);
  s["k"] = c.k;
  s["seed"] = c.seed;
  s["replicas"] = c.replicas;
  s["n_ladder"] = c.ladder;
  s["statistic"] = res.statistic_name;
  s["abscissa"] = res.abscissa_name;
  s["estimate"] = detail::optional_number(res.estimate);
  s["theory"] = detail::optional_number(res.theory);
  s["abs_error"] = detail::optional_number(res.abs_error());
  s["rel_error"] = detail::optional_number(res.rel_error());
  if (res.fit) {
    s["fit"] = {{"slope", res.fit->slope},
                {"intercept", res.fit->intercept},
                {"residual", res.fit->residual},
                {"slope_stderr", res.fit->slope_stderr},
                {"points", res.fit->count}};
  } else {
    s["fit"] = nullptr;
  }
  json levels = json::array();
  for (const Level& lv : res.levels) {
    levels.push_back({{"n", lv.n},
                      {"abscissa", lv.abscissa},
                      {"mean_statistic", detail::finite_or_null(lv.mean_statistic)},
                      {"mean_y", detail::finite_or_null(lv.mean_y)},
                      {"stderr_y", detail::finite_or_null(lv.stderr_y)},
                      {"used", lv.used}});
  }
  s["levels"] = std::move(levels);
  json echo = c.source;
  echo.erase("out");  // keep outputs independent of where they are written
  s["config"] = std::move(echo);
  return s;
}

/// Summary plus raw statistics; report() rebuilds every output from this.
inline json result_json(const ExperimentResult& res) {
  json j = summary_json(res);
  json rows = json::array();
  for (const Row& r : res.rows) rows.push_back({r.n, r.replica, r.statistic});
  j["rows"] = std::move(rows);
  return j;
}

inline ExperimentResult result_from_json(const json& j) {
  try {
    ExperimentResult res;
    res.config = config_from_json(j.at("config"));
    res.statistic_name = j.at("statistic").get<std::string>();
    res.abscissa_name = j.at("abscissa").get<std::string>();
    res.estimate = detail::read_optional(j, "estimate");
    res.theory = detail::read_optional(j, "theory");
    if (!j.at("fit").is_null()) {
      const json& f = j.at("fit");
      res.fit = LinearFit{f.at("slope").get<double>(), f.at("intercept").get<double>(), f.at("residual").get<double>(),
                          f.at("slope_stderr").get<double>(), f.at("points").get<std::size_t>()};
    }
    for (const json& lv : j.at("levels")) {
      Level l;
      l.n = lv.at("n").get<std::size_t>();
      l.abscissa = lv.at("abscissa").get<double>();
      l.mean_statistic = detail::read_optional(lv, "mean_statistic").value_or(std::nan(""));
      l.mean_y = detail::read_optional(lv, "mean_y").value_or(std::nan(""));
      l.stderr_y = detail::read_optional(lv, "stderr_y").value_or(std::nan(""));
      l.used = lv.at("used").get<std::size_t>();
      res.levels.push_back(l);
    }
    for (const json& r : j.at("rows")) {
      const auto n = r.at(0).get<std::size_t>();
      const double s = r.at(2).get<double>();
      res.rows.push_back({n, r.at(1).get<std::size_t>(), s, row_exponent(res.config.kind, s, n)});
    }
    return res;
  } catch (const json::exception& e) {
    throw Error(Errc::IoError, std::string("malformed result file: ") + e.what());
  }
}

/// Line chart of mean y against the abscissa with standard-error bars and the
/// theoretical slope (or level) drawn through the data.
inline std::string plot_svg(const ExperimentResult& res) {
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 30, B = 50;
  std::vector<const Level*> pts;
  for (const Level& lv : res.levels) {
    if (lv.used > 0 && std::isfinite(lv.mean_y)) pts.push_back(&lv);
  }
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string ylabel = is_distance_kind(res.config.kind) ? "mean log " + res.statistic_name
                                                              : "mean " + res.statistic_name;
  svg << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << kind_name(res.config.kind) << ", k=" << res.config.k << ", R=" << res.config.replicas << "</text>\n";
  if (pts.empty()) {
    svg << "<text x=\"" << W / 2 << "\" y=\"" << H / 2 << "\" text-anchor=\"middle\">no data</text>\n</svg>\n";
    return svg.str();
  }

  double x0 = pts.front()->abscissa, x1 = x0, y0 = pts.front()->mean_y, y1 = y0;
  double cx = 0.0, cy = 0.0;
  for (const Level* p : pts) {
    x0 = std::min(x0, p->abscissa);
    x1 = std::max(x1, p->abscissa);
    y0 = std::min(y0, p->mean_y - p->stderr_y);
    y1 = std::max(y1, p->mean_y + p->stderr_y);
    cx += p->abscissa;
    cy += p->mean_y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  const bool sloped = uses_regression(res.config.kind);
  auto theory_at = [&](double x) { return sloped ? cy + *res.theory * (x - cx) : *res.theory; };
  if (res.theory) {
    y0 = std::min({y0, theory_at(x0), theory_at(x1)});
    y1 = std::max({y1, theory_at(x0), theory_at(x1)});
  }
  if (x1 == x0) {
    x0 -= 1.0;
    x1 += 1.0;
  }
  if (y1 == y0) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << res.abscissa_name << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
  for (double x : {x0, x1}) {
    svg << "<text x=\"" << fmt(px(x)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
        << fmt(x) << "</text>\n";
  }
  for (double y : {y0, y1}) {
    svg << "<text x=\"" << L - 4 << "\" y=\"" << fmt(py(y) + 3) << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(y)
        << "</text>\n";
  }

  if (res.theory) {
    svg << "<line x1=\"" << fmt(px(x0)) << "\" y1=\"" << fmt(py(theory_at(x0))) << "\" x2=\"" << fmt(px(x1))
        << "\" y2=\"" << fmt(py(theory_at(x1))) << "\" stroke=\"#c0392b\" stroke-dasharray=\"6 4\"/>\n";
  }
  svg << "<polyline fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    svg << (i ? " " : "") << fmt(px(pts[i]->abscissa)) << ',' << fmt(py(pts[i]->mean_y));
  }
  svg << "\"/>\n";
  for (const Level* p : pts) {
    const double x = px(p->abscissa);
    svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(py(p->mean_y - p->stderr_y)) << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << fmt(py(p->mean_y + p->stderr_y)) << "\" stroke=\"#1f4e79\"/>\n";
    svg << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(py(p->mean_y)) << "\" r=\"3\" fill=\"#1f4e79\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

}  // namespace detail

enum class Format { Csv, Json, Svg, All };

/// Writes the requested outputs into dir (created if needed).
inline void report(const ExperimentResult& res, const std::filesystem::path& dir, Format format = Format::All) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  if (format == Format::Csv || format == Format::All) detail::write_file(dir / "rows.csv", rows_csv(res));
  if (format == Format::Json || format == Format::All) {
    detail::write_file(dir / "summary.json", summary_json(res).dump(2) + "\n");
  }
  if (format == Format::Svg || format == Format::All) detail::write_file(dir / "plot.svg", plot_svg(res));
  if (format == Format::All) detail::write_file(dir / "result.json", result_json(res).dump() + "\n");
}

inline void write_runtime(const ExperimentResult& res, const std::filesystem::path& dir) {
  json j{{"runtime_seconds", res.runtime_seconds}, {"threads", res.threads}};
  detail::write_file(dir / "runtime.json", j.dump(2) + "\n");
}

inline ExperimentResult load_result(const std::filesystem::path& dir) {
  std::ifstream in(dir / "result.json");
  if (!in) throw Error(Errc::IoError, "cannot read " + (dir / "result.json").string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Errc::IoError, std::string("malformed result file: ") + e.what());
  }
  return result_from_json(j);
}

}  // namespace orbitmatch::experiments
