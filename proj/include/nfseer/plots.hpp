#pragma once

// Plot data for the MMRE interval plot and boxplot: CSV records plus a
// minimal SVG rendering of each.

#include <nfseer/csv.hpp>
#include <nfseer/error.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace nfseer {

struct NamedSample {
  std::string model;
  std::vector<double> values;
};

struct IntervalRecord {
  std::string model;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double t_quantile = 0.0;  // 0 when n == 1
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct BoxplotRecord {
  std::string model;
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

namespace detail {

inline void check_sample(const NamedSample& s) {
  if (s.values.empty()) throw ArgumentError("plot sample '" + s.model + "' is empty");
  for (double v : s.values) {
    if (!std::isfinite(v)) throw DomainError("plot sample '" + s.model + "' has a non-finite value");
  }
}

inline double median_range(const std::vector<double>& sorted, std::size_t lo, std::size_t hi) {
  const std::size_t n = hi - lo;
  const std::size_t mid = lo + n / 2;
  return n % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

}  // namespace detail

/// Mean with a two-sided 95% Student-t interval.
inline IntervalRecord interval_record(const NamedSample& s, double confidence = 0.95) {
  detail::check_sample(s);
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
  IntervalRecord r;
  r.model = s.model;
  r.n = s.values.size();
  const double n = static_cast<double>(r.n);
  double sum = 0.0;
  for (double v : s.values) sum += v;
  r.mean = sum / n;
  r.ci_low = r.ci_high = r.mean;
  if (r.n < 2) return r;
  double ss = 0.0;
  for (double v : s.values) ss += (v - r.mean) * (v - r.mean);
  r.sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  r.t_quantile = boost::math::quantile(dist, 0.5 + confidence / 2.0);
  const double half = r.t_quantile * r.sd / std::sqrt(n);
  r.ci_low = r.mean - half;
  r.ci_high = r.mean + half;
  return r;
}

/// Tukey hinges; the median joins both halves when n is odd. Outliers lie
/// outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
inline BoxplotRecord boxplot_record(const NamedSample& s) {
  detail::check_sample(s);
  std::vector<double> v = s.values;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  BoxplotRecord r;
  r.model = s.model;
  r.n = n;
  r.min = v.front();
  r.max = v.back();
  r.median = detail::median_range(v, 0, n);
  const std::size_t half = (n + 1) / 2;
  r.q1 = detail::median_range(v, 0, half);
  r.q3 = detail::median_range(v, n - half, n);
  const double iqr = r.q3 - r.q1;
  const double lo_fence = r.q1 - 1.5 * iqr;
  const double hi_fence = r.q3 + 1.5 * iqr;
  r.whisker_low = r.max;
  r.whisker_high = r.min;
  for (double x : v) {
    if (x < lo_fence || x > hi_fence) {
      r.outliers.push_back(x);
    } else {
      r.whisker_low = std::min(r.whisker_low, x);
      r.whisker_high = std::max(r.whisker_high, x);
    }
  }
  return r;
}

inline std::string format_interval_csv(const std::vector<IntervalRecord>& records) {
  std::string out = "model,n,mean,sd,t_quantile,ci_low,ci_high\n";
  for (const auto& r : records) {
    out += csv::format_row({r.model, std::to_string(r.n), csv::format_double(r.mean), csv::format_double(r.sd),
                            csv::format_double(r.t_quantile), csv::format_double(r.ci_low),
                            csv::format_double(r.ci_high)});
  }
  return out;
}

/// Outliers are semicolon-joined in one cell.
inline std::string format_boxplot_csv(const std::vector<BoxplotRecord>& records) {
  std::string out = "model,n,min,q1,median,q3,max,whisker_low,whisker_high,outliers\n";
  for (const auto& r : records) {
    std::string outliers;
    for (std::size_t i = 0; i < r.outliers.size(); ++i) {
      if (i) outliers += ';';
      outliers += csv::format_double(r.outliers[i]);
    }
    out += csv::format_row({r.model, std::to_string(r.n), csv::format_double(r.min), csv::format_double(r.q1),
                            csv::format_double(r.median), csv::format_double(r.q3), csv::format_double(r.max),
                            csv::format_double(r.whisker_low), csv::format_double(r.whisker_high), outliers});
  }
  return out;
}

namespace detail {

struct SvgFrame {
  double lo = 0.0, hi = 1.0;
  static constexpr double width = 480.0, height = 320.0, margin = 48.0;

  double y(double v) const {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    return height - margin - t * (height - 2.0 * margin);
  }
  double x(std::size_t i, std::size_t count) const {
    return margin + (static_cast<double>(i) + 0.5) * (width - 2.0 * margin) / static_cast<double>(count);
  }
};

inline SvgFrame make_frame(double lo, double hi) {
  const double pad = hi > lo ? 0.05 * (hi - lo) : std::max(0.5, std::abs(lo) * 0.1);
  return {lo - pad, hi + pad};
}

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline std::string svg_open(const std::string& title, const SvgFrame& f) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(SvgFrame::width) + "\" height=\"" +
                  num(SvgFrame::height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(SvgFrame::width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" + title +
       "</text>\n";
  s += "<line x1=\"" + num(SvgFrame::margin) + "\" y1=\"" + num(SvgFrame::margin) + "\" x2=\"" +
       num(SvgFrame::margin) + "\" y2=\"" + num(SvgFrame::height - SvgFrame::margin) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = f.lo + (f.hi - f.lo) * k / 4.0;
    s += "<text x=\"" + num(SvgFrame::margin - 4) + "\" y=\"" + num(f.y(v) + 4) + "\" text-anchor=\"end\">" +
         num(v) + "</text>\n";
  }
  return s;
}

inline std::string label(const std::string& text, double x) {
  return "<text x=\"" + num(x) + "\" y=\"" + num(SvgFrame::height - SvgFrame::margin + 16) +
         "\" text-anchor=\"middle\">" + text + "</text>\n";
}

inline std::string hline(double x1, double x2, double y) {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y) +
         "\" stroke=\"black\"/>\n";
}

inline std::string vline(double x, double y1, double y2) {
  return "<line x1=\"" + num(x) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x) + "\" y2=\"" + num(y2) +
         "\" stroke=\"black\"/>\n";
}

}  // namespace detail

inline std::string render_interval_svg(const std::vector<IntervalRecord>& records) {
  if (records.empty()) throw ArgumentError("nothing to plot");
  double lo = records.front().ci_low, hi = records.front().ci_high;
  for (const auto& r : records) {
    lo = std::min(lo, r.ci_low);
    hi = std::max(hi, r.ci_high);
  }
  const auto f = detail::make_frame(lo, hi);
  std::string s = detail::svg_open("Interval plot (95% CI of the mean)", f);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const double x = f.x(i, records.size());
    s += detail::vline(x, f.y(r.ci_low), f.y(r.ci_high));
    s += detail::hline(x - 10, x + 10, f.y(r.ci_low));
    s += detail::hline(x - 10, x + 10, f.y(r.ci_high));
    s += "<circle cx=\"" + detail::num(x) + "\" cy=\"" + detail::num(f.y(r.mean)) + "\" r=\"3\" fill=\"black\"/>\n";
    s += detail::label(r.model, x);
  }
  return s + "</svg>\n";
}

inline std::string render_boxplot_svg(const std::vector<BoxplotRecord>& records) {
  if (records.empty()) throw ArgumentError("nothing to plot");
  double lo = records.front().min, hi = records.front().max;
  for (const auto& r : records) {
    lo = std::min(lo, r.min);
    hi = std::max(hi, r.max);
  }
  const auto f = detail::make_frame(lo, hi);
  std::string s = detail::svg_open("Boxplot", f);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const double x = f.x(i, records.size());
    const double top = f.y(r.q3), bottom = f.y(r.q1);
    s += "<rect x=\"" + detail::num(x - 20) + "\" y=\"" + detail::num(top) + "\" width=\"40\" height=\"" +
         detail::num(bottom - top) + "\" fill=\"#cfe0f3\" stroke=\"black\"/>\n";
    s += detail::hline(x - 20, x + 20, f.y(r.median));
    s += detail::vline(x, f.y(r.q3), f.y(r.whisker_high));
    s += detail::vline(x, f.y(r.q1), f.y(r.whisker_low));
    s += detail::hline(x - 8, x + 8, f.y(r.whisker_high));
    s += detail::hline(x - 8, x + 8, f.y(r.whisker_low));
    for (double o : r.outliers) {
      s += "<circle cx=\"" + detail::num(x) + "\" cy=\"" + detail::num(f.y(o)) +
           "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
    }
    s += detail::label(r.model, x);
  }
  return s + "</svg>\n";
}

struct PlotFiles {
  std::vector<IntervalRecord> intervals;
  std::vector<BoxplotRecord> boxes;
};

/// Writes interval.csv, boxplot.csv, interval.svg and boxplot.svg into out_dir
/// (created if absent).
inline PlotFiles emit_plot_data(const std::vector<NamedSample>& samples, const std::filesystem::path& out_dir) {
  if (samples.empty()) throw ArgumentError("no samples to plot");
  PlotFiles files;
  for (const auto& s : samples) {
    files.intervals.push_back(interval_record(s));
    files.boxes.push_back(boxplot_record(s));
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create plot directory " + out_dir.string());
  }
  csv::write_file((out_dir / "interval.csv").string(), format_interval_csv(files.intervals));
  csv::write_file((out_dir / "boxplot.csv").string(), format_boxplot_csv(files.boxes));
  csv::write_file((out_dir / "interval.svg").string(), render_interval_svg(files.intervals));
  csv::write_file((out_dir / "boxplot.svg").string(), render_boxplot_svg(files.boxes));
  return files;
}

}  // namespace nfseer
