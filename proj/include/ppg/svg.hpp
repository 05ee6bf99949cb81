#pragma once

#include <string>
#include <vector>

namespace ppg {

/// One line on a chart, optionally with a shaded min/max band (same length
/// as x when present).
struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_lo;
  std::vector<double> band_hi;
};

struct ChartSpec {
  std::string title;
  std::string x_label = "env steps";
  std::string y_label = "mean episode return";
  int width = 860;
  int height = 520;
};

/// Deterministic standalone SVG line chart (fixed palette, fixed number
/// formatting), so identical inputs produce identical files.
void render_line_chart(const std::vector<Curve>& curves, const ChartSpec& spec,
                       const std::string& out_path);

}  // namespace ppg
