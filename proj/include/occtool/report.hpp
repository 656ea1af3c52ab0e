#pragma once

#include <string>
#include <vector>

#include "occtool/control_sim.hpp"

namespace occtool {

struct ChartSeries {
  std::string name;
  std::vector<MonthlyRollup> rollup;
};

// Deterministic SVG renderings of the monthly results: stacked heating and
// cooling bars grouped by month, and a PPD line chart. No timestamps or
// generated ids are embedded, so identical inputs give identical bytes.
std::string render_energy_chart_svg(const std::vector<ChartSeries>& series);
std::string render_ppd_chart_svg(const std::vector<ChartSeries>& series);

}  // namespace occtool
