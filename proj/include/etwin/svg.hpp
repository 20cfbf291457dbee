// Minimal SVG emission for report figures: multi-series line plots and box
// plots.  No external dependencies; numeric text uses the shortest
// round-trip formatter so outputs are bit-stable across runs.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "etwin/core.hpp"

namespace etwin {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct BoxGroup {
  std::string label;
  std::vector<double> samples;
};

namespace svgdetail {

inline const char* kPalette[] = {"#1f6fb2", "#d1495b", "#2e8b57", "#e08a1e",
                                 "#6a4c93", "#3aa6a6", "#8c5e2a", "#555555"};
inline constexpr int kPaletteSize = 8;

struct Frame {
  double w = 840, h = 520;
  double ml = 72, mr = 24, mt = 40, mb = 56;
  double x0, x1, y0, y1;  // data ranges

  double px(double x) const {
    return ml + (x - x0) / (x1 - x0) * (w - ml - mr);
  }
  double py(double y) const {
    return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
  }
};

// Round tick spacing to a 1-2-5 progression covering roughly n intervals.
inline double nice_step(double span, int n) {
  if (!(span > 0)) return 1;
  double raw = span / std::max(1, n);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double frac = raw / mag;
  double step = frac <= 1 ? 1 : frac <= 2 ? 2 : frac <= 5 ? 5 : 10;
  return step * mag;
}

inline std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

inline void axes(std::ofstream& f, const Frame& fr, const std::string& title,
                 const std::string& xlabel, const std::string& ylabel) {
  f << "<rect x='" << fr.ml << "' y='" << fr.mt << "' width='"
    << fr.w - fr.ml - fr.mr << "' height='" << fr.h - fr.mt - fr.mb
    << "' fill='white' stroke='#333'/>\n";
  double xs = nice_step(fr.x1 - fr.x0, 8);
  for (double x = std::ceil(fr.x0 / xs) * xs; x <= fr.x1 + 1e-9 * xs; x += xs) {
    double px = fr.px(x);
    f << "<line x1='" << px << "' y1='" << fr.h - fr.mb << "' x2='" << px
      << "' y2='" << fr.h - fr.mb + 5 << "' stroke='#333'/>\n";
    f << "<text x='" << px << "' y='" << fr.h - fr.mb + 20
      << "' font-size='12' text-anchor='middle'>" << format_double(x)
      << "</text>\n";
  }
  double ys = nice_step(fr.y1 - fr.y0, 6);
  for (double y = std::ceil(fr.y0 / ys) * ys; y <= fr.y1 + 1e-9 * ys; y += ys) {
    double py = fr.py(y);
    f << "<line x1='" << fr.ml - 5 << "' y1='" << py << "' x2='" << fr.ml
      << "' y2='" << py << "' stroke='#333'/>\n";
    f << "<line x1='" << fr.ml << "' y1='" << py << "' x2='" << fr.w - fr.mr
      << "' y2='" << py << "' stroke='#eee'/>\n";
    f << "<text x='" << fr.ml - 9 << "' y='" << py + 4
      << "' font-size='12' text-anchor='end'>" << format_double(y)
      << "</text>\n";
  }
  f << "<text x='" << (fr.ml + fr.w - fr.mr) / 2 << "' y='" << fr.h - 14
    << "' font-size='13' text-anchor='middle'>" << esc(xlabel) << "</text>\n";
  f << "<text x='18' y='" << (fr.mt + fr.h - fr.mb) / 2
    << "' font-size='13' text-anchor='middle' transform='rotate(-90 18 "
    << (fr.mt + fr.h - fr.mb) / 2 << ")'>" << esc(ylabel) << "</text>\n";
  f << "<text x='" << fr.w / 2 << "' y='24' font-size='15' "
    << "text-anchor='middle' font-weight='bold'>" << esc(title)
    << "</text>\n";
}

}  // namespace svgdetail

inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::string& xlabel,
                            const std::string& ylabel,
                            const std::vector<PlotSeries>& series) {
  using namespace svgdetail;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);

  Frame fr;
  fr.x0 = fr.y0 = std::numeric_limits<double>::infinity();
  fr.x1 = fr.y1 = -fr.x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      fr.x0 = std::min(fr.x0, s.x[i]);
      fr.x1 = std::max(fr.x1, s.x[i]);
      fr.y0 = std::min(fr.y0, s.y[i]);
      fr.y1 = std::max(fr.y1, s.y[i]);
    }
  if (!(fr.x1 > fr.x0)) { fr.x0 -= 1; fr.x1 += 1; }
  if (!(fr.y1 > fr.y0)) { fr.y0 -= 1; fr.y1 += 1; }
  double pad = 0.04 * (fr.y1 - fr.y0);
  fr.y0 -= pad;
  fr.y1 += pad;

  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << fr.w
    << "' height='" << fr.h << "' font-family='sans-serif'>\n";
  axes(f, fr, title, xlabel, ylabel);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    f << "<polyline fill='none' stroke='" << color << "' stroke-width='1.6' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      f << fr.px(s.x[i]) << ',' << fr.py(s.y[i]) << ' ';
    f << "'/>\n";
    if (!s.label.empty()) {
      double ly = fr.mt + 16 + 16 * static_cast<double>(si);
      f << "<line x1='" << fr.w - fr.mr - 130 << "' y1='" << ly << "' x2='"
        << fr.w - fr.mr - 106 << "' y2='" << ly << "' stroke='" << color
        << "' stroke-width='2'/>\n";
      f << "<text x='" << fr.w - fr.mr - 100 << "' y='" << ly + 4
        << "' font-size='12'>" << esc(s.label) << "</text>\n";
    }
  }
  f << "</svg>\n";
  if (!f) throw IoError("write failed: " + path);
}

inline void write_box_plot(const std::string& path, const std::string& title,
                           const std::string& ylabel,
                           const std::vector<BoxGroup>& groups) {
  using namespace svgdetail;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);

  Frame fr;
  fr.x0 = 0;
  fr.x1 = static_cast<double>(groups.size());
  fr.y0 = std::numeric_limits<double>::infinity();
  fr.y1 = -fr.y0;
  for (const auto& g : groups)
    for (double v : g.samples) {
      fr.y0 = std::min(fr.y0, v);
      fr.y1 = std::max(fr.y1, v);
    }
  if (!(fr.y1 > fr.y0)) { fr.y0 -= 1; fr.y1 += 1; }
  double pad = 0.08 * (fr.y1 - fr.y0);
  fr.y0 -= pad;
  fr.y1 += pad;

  auto quantile = [](std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.empty()) return 0.0;
    double pos = q * (static_cast<double>(v.size()) - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double w = pos - static_cast<double>(lo);
    return v[lo] * (1 - w) + v[hi] * w;
  };

  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << fr.w
    << "' height='" << fr.h << "' font-family='sans-serif'>\n";
  // frame + y axis only
  f << "<rect x='" << fr.ml << "' y='" << fr.mt << "' width='"
    << fr.w - fr.ml - fr.mr << "' height='" << fr.h - fr.mt - fr.mb
    << "' fill='white' stroke='#333'/>\n";
  double ys = nice_step(fr.y1 - fr.y0, 6);
  for (double y = std::ceil(fr.y0 / ys) * ys; y <= fr.y1 + 1e-9 * ys; y += ys) {
    double py = fr.py(y);
    f << "<line x1='" << fr.ml << "' y1='" << py << "' x2='" << fr.w - fr.mr
      << "' y2='" << py << "' stroke='#eee'/>\n";
    f << "<text x='" << fr.ml - 9 << "' y='" << py + 4
      << "' font-size='12' text-anchor='end'>" << format_double(y)
      << "</text>\n";
  }
  f << "<text x='" << fr.w / 2 << "' y='24' font-size='15' "
    << "text-anchor='middle' font-weight='bold'>" << esc(title) << "</text>\n";
  f << "<text x='18' y='" << (fr.mt + fr.h - fr.mb) / 2
    << "' font-size='13' text-anchor='middle' transform='rotate(-90 18 "
    << (fr.mt + fr.h - fr.mb) / 2 << ")'>" << esc(ylabel) << "</text>\n";

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    if (g.samples.empty()) continue;
    double cx = fr.px(static_cast<double>(gi) + 0.5);
    double half = 0.32 * (fr.px(1) - fr.px(0));
    double q1 = quantile(g.samples, 0.25);
    double q2 = quantile(g.samples, 0.5);
    double q3 = quantile(g.samples, 0.75);
    double lo = *std::min_element(g.samples.begin(), g.samples.end());
    double hi = *std::max_element(g.samples.begin(), g.samples.end());
    const char* color = kPalette[gi % kPaletteSize];
    f << "<line x1='" << cx << "' y1='" << fr.py(lo) << "' x2='" << cx
      << "' y2='" << fr.py(hi) << "' stroke='#333'/>\n";
    for (double v : {lo, hi})
      f << "<line x1='" << cx - half * 0.5 << "' y1='" << fr.py(v) << "' x2='"
        << cx + half * 0.5 << "' y2='" << fr.py(v) << "' stroke='#333'/>\n";
    f << "<rect x='" << cx - half << "' y='" << fr.py(q3) << "' width='"
      << 2 * half << "' height='" << fr.py(q1) - fr.py(q3) << "' fill='"
      << color << "' fill-opacity='0.35' stroke='#333'/>\n";
    f << "<line x1='" << cx - half << "' y1='" << fr.py(q2) << "' x2='"
      << cx + half << "' y2='" << fr.py(q2)
      << "' stroke='#333' stroke-width='2'/>\n";
    for (double v : g.samples)
      f << "<circle cx='" << cx << "' cy='" << fr.py(v)
        << "' r='2.2' fill='#333' fill-opacity='0.5'/>\n";
    f << "<text x='" << cx << "' y='" << fr.h - fr.mb + 20
      << "' font-size='12' text-anchor='middle'>" << esc(g.label)
      << "</text>\n";
  }
  f << "</svg>\n";
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace etwin
