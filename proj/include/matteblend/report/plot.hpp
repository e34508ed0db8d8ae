#pragma once

// Sweep results table and its figures.
//
// The CSV holds one row per (grid cell x eval set). Boundary aggregates are
// absent when every image in the set had an empty band; such cells serialize
// as the literal "nan". Charts are self-contained SVG: per eval set one
// whole-region and one boundary-band MSE chart, segmentation count on a
// categorical x-axis, one line per matte count. Rendering is a pure function
// of the parsed rows, so identical CSVs yield identical bytes.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

struct SweepRow {
  int seg_n = 0;
  int mat_n = 0;
  std::string eval_set;
  double mse_whole = 0.0;
  double sad_whole = 0.0;
  std::optional<double> mse_boundary;
  std::optional<double> sad_boundary;
  int n_images = 0;
  int n_boundary_skipped = 0;

  bool operator==(const SweepRow&) const = default;
};

inline constexpr const char* kSweepCsvHeader =
    "seg_n,mat_n,eval_set,mse_whole,sad_whole,mse_boundary,sad_boundary,n_images,"
    "n_boundary_skipped";

namespace plot_detail {

inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

[[noreturn]] inline void row_error(const std::string& path, std::size_t lineno,
                                   const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
}

inline int parse_int(const std::string& s, const std::string& path, std::size_t lineno,
                     const char* field) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    row_error(path, lineno, std::string("bad integer '") + s + "' in " + field);
  }
}

inline double parse_double(const std::string& s, const std::string& path, std::size_t lineno,
                           const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    row_error(path, lineno, std::string("bad number '") + s + "' in " + field);
  }
}

inline std::optional<double> parse_optional(const std::string& s, const std::string& path,
                                            std::size_t lineno, const char* field) {
  if (s == "nan") return std::nullopt;
  return parse_double(s, path, lineno, field);
}

}  // namespace plot_detail

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sweep csv: " + path);
  out << kSweepCsvHeader << "\n";
  for (const SweepRow& r : rows) {
    out << r.seg_n << ',' << r.mat_n << ',' << r.eval_set << ',' << plot_detail::fmt(r.mse_whole)
        << ',' << plot_detail::fmt(r.sad_whole) << ',' << plot_detail::fmt(r.mse_boundary) << ','
        << plot_detail::fmt(r.sad_boundary) << ',' << r.n_images << ',' << r.n_boundary_skipped
        << "\n";
  }
}

inline std::vector<SweepRow> parse_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read sweep csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader)
    plot_detail::row_error(path, 1, std::string("expected header '") + kSweepCsvHeader + "'");

  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> f = plot_detail::split_fields(line);
    if (f.size() != 9)
      plot_detail::row_error(path, lineno,
                             "expected 9 fields, got " + std::to_string(f.size()));
    SweepRow r;
    r.seg_n = plot_detail::parse_int(f[0], path, lineno, "seg_n");
    r.mat_n = plot_detail::parse_int(f[1], path, lineno, "mat_n");
    r.eval_set = f[2];
    if (r.eval_set.empty()) plot_detail::row_error(path, lineno, "empty eval_set");
    r.mse_whole = plot_detail::parse_double(f[3], path, lineno, "mse_whole");
    r.sad_whole = plot_detail::parse_double(f[4], path, lineno, "sad_whole");
    r.mse_boundary = plot_detail::parse_optional(f[5], path, lineno, "mse_boundary");
    r.sad_boundary = plot_detail::parse_optional(f[6], path, lineno, "sad_boundary");
    r.n_images = plot_detail::parse_int(f[7], path, lineno, "n_images");
    r.n_boundary_skipped = plot_detail::parse_int(f[8], path, lineno, "n_boundary_skipped");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  return rows;
}

namespace plot_detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                           "#9467bd", "#ff7f0e", "#8c564b"};
inline constexpr int kPaletteSize = 6;

struct Series {
  int mat_n;
  std::vector<std::pair<int, double>> points;  // (seg_n, value), seg-sorted
};

inline std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// One chart: categorical seg-count x-axis, linear y from zero, one polyline
/// per matte count.
inline std::string render_chart(const std::string& title, const std::string& y_label,
                                const std::vector<int>& seg_counts,
                                const std::vector<Series>& series) {
  const double width = 640, height = 420;
  const double left = 70, right = width - 170, top = 46, bottom = height - 52;

  double ymax = 0.0;
  for (const Series& s : series)
    for (const auto& [seg, v] : s.points) ymax = std::max(ymax, v);
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.08;

  auto x_of = [&](int seg) {
    const auto it = std::find(seg_counts.begin(), seg_counts.end(), seg);
    const double i = static_cast<double>(it - seg_counts.begin());
    return left + (i + 0.5) * (right - left) / static_cast<double>(seg_counts.size());
  };
  auto y_of = [&](double v) { return bottom - (v / ymax) * (bottom - top); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << coord((left + right) / 2) << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\" font-weight=\"bold\">"
      << title << "</text>\n";

  // Axes and gridlines.
  svg << "<line x1=\"" << coord(left) << "\" y1=\"" << coord(bottom) << "\" x2=\"" << coord(right)
      << "\" y2=\"" << coord(bottom) << "\" stroke=\"#333\"/>\n"
      << "<line x1=\"" << coord(left) << "\" y1=\"" << coord(top) << "\" x2=\"" << coord(left)
      << "\" y2=\"" << coord(bottom) << "\" stroke=\"#333\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = ymax * t / 5.0;
    const double y = y_of(v);
    char label[32];
    std::snprintf(label, sizeof(label), "%.3g", v);
    svg << "<line x1=\"" << coord(left) << "\" y1=\"" << coord(y) << "\" x2=\"" << coord(right)
        << "\" y2=\"" << coord(y) << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << coord(left - 8) << "\" y=\"" << coord(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << label
        << "</text>\n";
  }
  for (int seg : seg_counts)
    svg << "<text x=\"" << coord(x_of(seg)) << "\" y=\"" << coord(bottom + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << seg
        << "</text>\n";
  svg << "<text x=\"" << coord((left + right) / 2) << "\" y=\"" << coord(height - 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
         "segmentation images</text>\n"
      << "<text x=\"20\" y=\"" << coord((top + bottom) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 20 "
      << coord((top + bottom) / 2) << ")\">" << y_label << "</text>\n";

  // Series polylines, markers and legend.
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    if (s.points.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (const auto& [seg, v] : s.points) svg << coord(x_of(seg)) << "," << coord(y_of(v)) << " ";
      svg << "\"/>\n";
    }
    for (const auto& [seg, v] : s.points)
      svg << "<circle cx=\"" << coord(x_of(seg)) << "\" cy=\"" << coord(y_of(v))
          << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    const double ly = top + 10 + 20 * static_cast<double>(si);
    svg << "<rect x=\"" << coord(right + 16) << "\" y=\"" << coord(ly - 9)
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n"
        << "<text x=\"" << coord(right + 34) << "\" y=\"" << coord(ly + 2)
        << "\" font-family=\"sans-serif\" font-size=\"12\">mat=" << s.mat_n << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace plot_detail

/// Writes <eval_set>_mse_whole.svg and <eval_set>_mse_boundary.svg per eval
/// set found in the rows; returns the sorted list of written paths.
inline std::vector<std::string> render_sweep_charts(const std::vector<SweepRow>& rows,
                                                    const std::string& out_dir) {
  if (rows.empty()) throw std::invalid_argument("render_sweep_charts: no rows");

  std::map<std::string, std::vector<const SweepRow*>> by_set;
  for (const SweepRow& r : rows) by_set[r.eval_set].push_back(&r);

  std::vector<std::string> written;
  for (const auto& [set_name, set_rows] : by_set) {
    std::set<int> seg_set, mat_set;
    for (const SweepRow* r : set_rows) {
      seg_set.insert(r->seg_n);
      mat_set.insert(r->mat_n);
    }
    const std::vector<int> seg_counts(seg_set.begin(), seg_set.end());

    auto build = [&](auto&& value_of) {
      std::vector<plot_detail::Series> series;
      for (int mat : mat_set) {
        plot_detail::Series s;
        s.mat_n = mat;
        for (int seg : seg_counts)
          for (const SweepRow* r : set_rows)
            if (r->seg_n == seg && r->mat_n == mat)
              if (const std::optional<double> v = value_of(*r)) s.points.push_back({seg, *v});
        series.push_back(std::move(s));
      }
      return series;
    };

    struct Variant {
      const char* suffix;
      const char* subtitle;
      const char* y_label;
      std::vector<plot_detail::Series> series;
    };
    Variant variants[2] = {
        {"mse_whole", "whole-region MSE", "MSE x 1e3 (whole)",
         build([](const SweepRow& r) { return std::optional<double>(r.mse_whole); })},
        {"mse_boundary", "boundary-band MSE", "MSE x 1e3 (boundary)",
         build([](const SweepRow& r) { return r.mse_boundary; })},
    };
    for (const Variant& v : variants) {
      const std::string path = out_dir + "/" + set_name + "_" + v.suffix + ".svg";
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write chart: " + path);
      out << plot_detail::render_chart(set_name + ": " + v.subtitle, v.y_label, seg_counts,
                                       v.series);
      written.push_back(path);
    }
  }
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace matteblend
