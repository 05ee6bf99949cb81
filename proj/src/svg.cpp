#include "ppg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ppg/common.hpp"

namespace ppg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void grow(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

void render_line_chart(const std::vector<Curve>& curves, const ChartSpec& spec,
                       const std::string& out_path) {
  const int ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = spec.width - ml - mr;
  const double ph = spec.height - mt - mb;

  bool any = false;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i])) continue;
      if (!any) {
        xlo = xhi = c.x[i];
        ylo = yhi = c.y[i];
        any = true;
      }
      xlo = std::min(xlo, c.x[i]);
      xhi = std::max(xhi, c.x[i]);
      ylo = std::min(ylo, c.y[i]);
      yhi = std::max(yhi, c.y[i]);
      if (i < c.band_lo.size() && std::isfinite(c.band_lo[i]))
        ylo = std::min(ylo, c.band_lo[i]);
      if (i < c.band_hi.size() && std::isfinite(c.band_hi[i]))
        yhi = std::max(yhi, c.band_hi[i]);
    }
  }
  if (xhi <= xlo) xhi = xlo + 1;
  if (yhi <= ylo) yhi = ylo + 1;
  const double ypad = 0.05 * (yhi - ylo);
  ylo -= ypad;
  yhi += ypad;

  auto tx = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * pw; };
  auto ty = [&](double y) { return mt + (1.0 - (y - ylo) / (yhi - ylo)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
    << "\" height=\"" << spec.height << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"15\">"
    << spec.title << "</text>\n";

  // axes + ticks
  const double xstep = nice_step(xhi - xlo);
  const double ystep = nice_step(yhi - ylo);
  s << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (double x = std::ceil(xlo / xstep) * xstep; x <= xhi + 1e-9 * xstep;
       x += xstep) {
    s << "<line x1=\"" << num(tx(x)) << "\" y1=\"" << mt << "\" x2=\""
      << num(tx(x)) << "\" y2=\"" << mt + ph << "\" stroke=\"#eee\"/>\n";
    s << "<text x=\"" << num(tx(x)) << "\" y=\"" << mt + ph + 16
      << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
  }
  for (double y = std::ceil(ylo / ystep) * ystep; y <= yhi + 1e-9 * ystep;
       y += ystep) {
    s << "<line x1=\"" << ml << "\" y1=\"" << num(ty(y)) << "\" x2=\""
      << ml + pw << "\" y2=\"" << num(ty(y)) << "\" stroke=\"#eee\"/>\n";
    s << "<text x=\"" << ml - 6 << "\" y=\"" << num(ty(y) + 4)
      << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
  }
  s << "</g>\n";
  s << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << spec.height - 10
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
    << spec.x_label << "</text>\n";
  s << "<text x=\"16\" y=\"" << mt + ph / 2
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
       "transform=\"rotate(-90 16 "
    << mt + ph / 2 << ")\">" << spec.y_label << "</text>\n";

  // bands first so the lines draw over them
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    if (c.band_lo.size() != c.x.size() || c.band_hi.size() != c.x.size())
      continue;
    std::ostringstream pts;
    bool ok = false;
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.band_hi[i])) continue;
      pts << num(tx(c.x[i])) << ',' << num(ty(c.band_hi[i])) << ' ';
      ok = true;
    }
    for (std::size_t i = c.x.size(); i-- > 0;) {
      if (!std::isfinite(c.band_lo[i])) continue;
      pts << num(tx(c.x[i])) << ',' << num(ty(c.band_lo[i])) << ' ';
    }
    if (ok)
      s << "<polygon points=\"" << pts.str() << "\" fill=\""
        << kPalette[ci % 8] << "\" opacity=\"0.15\"/>\n";
  }

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    std::ostringstream pts;
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!std::isfinite(c.y[i])) continue;
      pts << num(tx(c.x[i])) << ',' << num(ty(c.y[i])) << ' ';
    }
    s << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
      << kPalette[ci % 8] << "\" stroke-width=\"1.6\"/>\n";
  }

  // legend
  s << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const double y = mt + 14 + 16 * static_cast<double>(ci);
    s << "<line x1=\"" << ml + 10 << "\" y1=\"" << num(y - 4) << "\" x2=\""
      << ml + 34 << "\" y2=\"" << num(y - 4) << "\" stroke=\""
      << kPalette[ci % 8] << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << ml + 40 << "\" y=\"" << num(y) << "\">"
      << curves[ci].label << "</text>\n";
  }
  s << "</g>\n</svg>\n";

  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot open '" + out_path + "' for writing");
  out << s.str();
}

}  // namespace ppg
