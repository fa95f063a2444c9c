#pragma once

// Self-contained SVG line charts of a trace: states, observer states and the
// mode signal, stacked vertically with a shared time axis.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "lmswitch/sim.hpp"

namespace lmswitch {

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Panel {
  std::string title;
  std::vector<std::string> labels;
  std::function<double(std::size_t, std::size_t)> value;  // (series, row)
  std::size_t series = 0;
  bool steps = false;
};

inline void draw_panel(std::ostream& os, const Trace& tr, const Panel& p, double top, double width, double height) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const double left = 60.0, right = 20.0, pad = 24.0;
  const double w = width - left - right, h = height - 2.0 * pad;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t s = 0; s < p.series; ++s)
    for (std::size_t k = 0; k < tr.size(); ++k) {
      lo = std::min(lo, p.value(s, k));
      hi = std::max(hi, p.value(s, k));
    }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double margin = 0.05 * (hi - lo);
  lo -= margin;
  hi += margin;
  const double t0 = tr.times.front(), t1 = std::max(tr.times.back(), t0 + 1e-12);
  auto px = [&](double t) { return left + w * (t - t0) / (t1 - t0); };
  auto py = [&](double v) { return top + pad + h * (hi - v) / (hi - lo); };

  os << "<rect x=\"" << left << "\" y=\"" << top + pad << "\" width=\"" << w << "\" height=\"" << h
     << "\" fill=\"none\" stroke=\"#888\"/>\n";
  os << "<text x=\"" << left << "\" y=\"" << top + pad - 6 << "\" font-size=\"13\">" << p.title << "</text>\n";
  for (double v : {lo + margin, 0.5 * (lo + hi), hi - margin})
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(v)
       << "</text>\n";
  if (lo < 0.0 && hi > 0.0)
    os << "<line x1=\"" << left << "\" x2=\"" << left + w << "\" y1=\"" << py(0.0) << "\" y2=\"" << py(0.0)
       << "\" stroke=\"#ccc\"/>\n";
  // Thin long traces to roughly two points per pixel.
  const std::size_t stride = std::max<std::size_t>(1, tr.size() / static_cast<std::size_t>(2.0 * w));
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < tr.size(); k += stride) rows.push_back(k);
  if (rows.back() + 1 != tr.size()) rows.push_back(tr.size() - 1);
  for (std::size_t s = 0; s < p.series; ++s) {
    os << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << colors[s % 6] << "\" points=\"";
    double prev = p.value(s, 0);
    for (std::size_t k : rows) {
      const double v = p.value(s, k);
      if (p.steps && k > 0) os << fmt(px(tr.times[k])) << ',' << fmt(py(prev)) << ' ';
      os << fmt(px(tr.times[k])) << ',' << fmt(py(v)) << ' ';
      prev = v;
    }
    os << "\"/>\n";
    os << "<text x=\"" << left + w - 10 - 40.0 * static_cast<double>(p.series - 1 - s) << "\" y=\"" << top + pad - 6
       << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << colors[s % 6] << "\">" << p.labels[s] << "</text>\n";
  }
  os << "<text x=\"" << left << "\" y=\"" << top + pad + h + 14 << "\" font-size=\"10\">" << fmt(t0) << "</text>\n";
  os << "<text x=\"" << left + w << "\" y=\"" << top + pad + h + 14 << "\" font-size=\"10\" text-anchor=\"end\">"
     << fmt(t1) << " s</text>\n";
}

}  // namespace detail

inline void write_trace_svg(std::ostream& os, const Trace& tr, const std::string& title = "") {
  if (tr.size() == 0) throw std::invalid_argument("write_trace_svg: empty trace");
  const double width = 900.0, panel = 220.0;
  std::vector<detail::Panel> panels;
  std::vector<std::string> xl, pl;
  for (std::size_t q = 0; q < tr.n; ++q) {
    xl.push_back("x" + std::to_string(q + 1));
    pl.push_back("phi" + std::to_string(q + 1));
  }
  panels.push_back({"state x", xl, [&](std::size_t s, std::size_t k) { return tr.x[k][s]; }, tr.n, false});
  panels.push_back({"observer phi", pl, [&](std::size_t s, std::size_t k) { return tr.phi[k][s]; }, tr.n, false});
  panels.push_back({"mode sigma", {"sigma"}, [&](std::size_t, std::size_t k) { return static_cast<double>(tr.sigma[k] + 1); }, 1, true});
  const double height = 30.0 + panel * static_cast<double>(panels.size());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) os << "<text x=\"" << width / 2 << "\" y=\"18\" font-size=\"15\" text-anchor=\"middle\">" << title << "</text>\n";
  for (std::size_t p = 0; p < panels.size(); ++p)
    detail::draw_panel(os, tr, panels[p], 30.0 + panel * static_cast<double>(p), width, panel);
  os << "</svg>\n";
}

}  // namespace lmswitch
