#include "occtool/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "occtool/errors.hpp"

namespace occtool {

namespace {

constexpr double kWidth = 960.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0, kRight = 25.0, kTop = 40.0, kBottom = 55.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::vector<std::pair<int, unsigned>> month_axis(const std::vector<ChartSeries>& series) {
  if (series.empty()) throw InputError("chart needs at least one series");
  std::set<std::pair<int, unsigned>> months;
  for (const auto& s : series) {
    if (s.rollup.empty()) throw InputError("chart series '" + s.name + "' has an empty rollup");
    for (const auto& r : s.rollup) months.insert({r.year, r.month});
  }
  return {months.begin(), months.end()};
}

std::string month_label(const std::pair<int, unsigned>& m) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u", m.first, m.second);
  return buf;
}

void chart_frame(std::ostringstream& svg, const std::string& title, const std::string& y_label,
                 double y_max, const std::vector<std::pair<int, unsigned>>& months) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\""
      << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(kTop + plot_h)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
      << "\" y2=\"" << fmt(kTop + plot_h) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double v = y_max * i / 5.0;
    const double y = kTop + plot_h - plot_h * i / 5.0;
    svg << "<line x1=\"" << fmt(kLeft - 4) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(kLeft)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v)
        << "</text>\n";
  }
  svg << "<text x=\"18\" y=\"" << fmt(kTop + plot_h / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 18 " << fmt(kTop + plot_h / 2) << ")\">" << y_label
      << "</text>\n";

  const double group_w = plot_w / static_cast<double>(months.size());
  for (size_t i = 0; i < months.size(); ++i) {
    const double x = kLeft + group_w * (static_cast<double>(i) + 0.5);
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << month_label(months[i]) << "</text>\n";
  }
}

void legend(std::ostringstream& svg, const std::vector<ChartSeries>& series) {
  double x = kLeft + 8;
  const double y = kTop - 10;
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    svg << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y - 9) << "\" width=\"12\" height=\"12\" "
        << "fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << fmt(x + 16) << "\" y=\"" << fmt(y + 1)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[s].name << "</text>\n";
    x += 16.0 + 8.0 * static_cast<double>(series[s].name.size()) + 24.0;
  }
}

}  // namespace

std::string render_energy_chart_svg(const std::vector<ChartSeries>& series) {
  const auto months = month_axis(series);
  std::map<std::pair<int, unsigned>, size_t> month_pos;
  for (size_t i = 0; i < months.size(); ++i) month_pos[months[i]] = i;

  double y_max = 0.0;
  for (const auto& s : series)
    for (const auto& r : s.rollup) y_max = std::max(y_max, r.e_heat_kwh + r.e_cool_kwh);
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.1;

  std::ostringstream svg;
  chart_frame(svg, "Monthly HVAC energy (heating solid, cooling translucent)", "Energy [kWh]",
              y_max, months);
  legend(svg, series);

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double group_w = plot_w / static_cast<double>(months.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(series.size());

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    for (const auto& r : series[s].rollup) {
      const size_t mi = month_pos.at({r.year, r.month});
      const double x = kLeft + group_w * static_cast<double>(mi) + group_w * 0.1 +
                       bar_w * static_cast<double>(s);
      const double heat_h = plot_h * r.e_heat_kwh / y_max;
      const double cool_h = plot_h * r.e_cool_kwh / y_max;
      const double y_heat = kTop + plot_h - heat_h;
      const double y_cool = y_heat - cool_h;
      svg << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y_heat) << "\" width=\"" << fmt(bar_w)
          << "\" height=\"" << fmt(heat_h) << "\" fill=\"" << color << "\"/>\n";
      svg << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y_cool) << "\" width=\"" << fmt(bar_w)
          << "\" height=\"" << fmt(cool_h) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.45\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_ppd_chart_svg(const std::vector<ChartSeries>& series) {
  const auto months = month_axis(series);
  std::map<std::pair<int, unsigned>, size_t> month_pos;
  for (size_t i = 0; i < months.size(); ++i) month_pos[months[i]] = i;

  double y_max = 0.0;
  for (const auto& s : series)
    for (const auto& r : s.rollup) y_max = std::max(y_max, r.mean_ppd);
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.15;

  std::ostringstream svg;
  chart_frame(svg, "Monthly average PPD", "PPD [%]", y_max, months);
  legend(svg, series);

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double group_w = plot_w / static_cast<double>(months.size());

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    std::ostringstream points;
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : series[s].rollup) {
      const size_t mi = month_pos.at({r.year, r.month});
      const double x = kLeft + group_w * (static_cast<double>(mi) + 0.5);
      const double y = kTop + plot_h - plot_h * r.mean_ppd / y_max;
      pts.emplace_back(x, y);
    }
    for (size_t i = 0; i < pts.size(); ++i)
      points << (i ? " " : "") << fmt(pts[i].first) << "," << fmt(pts[i].second);
    if (pts.size() > 1)
      svg << "<polyline points=\"" << points.str() << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
    for (const auto& [x, y] : pts)
      svg << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace occtool
