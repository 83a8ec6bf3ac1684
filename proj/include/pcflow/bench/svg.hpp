// Copyright 2026 The pcflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal deterministic SVG line plots. Output depends only on the input
// series; coordinates are printed with two decimals.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pcflow/error.hpp"

namespace pcflow::bench {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> lower;  // optional band; empty or same length as xs
  std::vector<double> upper;
  bool dashed = false;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Series> series;
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                           "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace detail

inline std::string render_svg(const LinePlot& plot) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
  for (const auto& s : plot.series) {
    if (s.xs.size() != s.ys.size()) throw InvalidArgumentError("series '" + s.label + "': xs/ys length mismatch");
    const bool band = !s.lower.empty();
    if (band && (s.lower.size() != s.xs.size() || s.upper.size() != s.xs.size()))
      throw InvalidArgumentError("series '" + s.label + "': band length mismatch");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (plot.log_x && s.xs[i] <= 0) throw InvalidArgumentError("log x axis needs positive x");
      xmin = std::min(xmin, tx(s.xs[i]));
      xmax = std::max(xmax, tx(s.xs[i]));
      ymin = std::min({ymin, s.ys[i], band ? s.lower[i] : s.ys[i]});
      ymax = std::max({ymax, s.ys[i], band ? s.upper[i] : s.ys[i]});
    }
  }
  if (!(xmin <= xmax)) xmin = 0, xmax = 1;
  if (!(ymin <= ymax)) ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double x) { return kLeft + (tx(x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  out += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::fmt2(kLeft + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         detail::escape_xml(plot.title) + "</text>\n";
  out += "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  out += "<rect x=\"" + detail::fmt2(kLeft) + "\" y=\"" + detail::fmt2(kTop) + "\" width=\"" + detail::fmt2(pw) +
         "\" height=\"" + detail::fmt2(ph) + "\"/>\n</g>\n";

  out += "<g class=\"ticks\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double vx = plot.log_x ? std::pow(10.0, fx) : fx;
    const double sx = kLeft + pw * i / 4.0;
    out += "<text x=\"" + detail::fmt2(sx) + "\" y=\"" + detail::fmt2(kTop + ph + 16) +
           "\" text-anchor=\"middle\">" + detail::tick_label(vx) + "</text>\n";
    const double vy = ymin + (ymax - ymin) * i / 4.0;
    out += "<text x=\"" + detail::fmt2(kLeft - 6) + "\" y=\"" + detail::fmt2(py(vy) + 4) +
           "\" text-anchor=\"end\">" + detail::tick_label(vy) + "</text>\n";
  }
  out += "</g>\n";
  out += "<text x=\"" + detail::fmt2(kLeft + pw / 2) + "\" y=\"" + detail::fmt2(kH - 10) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + detail::escape_xml(plot.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::fmt2(kTop + ph / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " +
         detail::fmt2(kTop + ph / 2) + ")\">" + detail::escape_xml(plot.y_label) + "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const std::string color = detail::kPalette[k % std::size(detail::kPalette)];
    out += "<g class=\"series\" data-label=\"" + detail::escape_xml(s.label) + "\">\n";
    if (!s.lower.empty() && !s.xs.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < s.xs.size(); ++i)
        pts += detail::fmt2(px(s.xs[i])) + "," + detail::fmt2(py(s.upper[i])) + " ";
      for (std::size_t i = s.xs.size(); i-- > 0;)
        pts += detail::fmt2(px(s.xs[i])) + "," + detail::fmt2(py(s.lower[i])) + (i ? " " : "");
      out += "<polygon class=\"band\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"" + pts +
             "\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.xs.size(); ++i)
      pts += (i ? " " : "") + detail::fmt2(px(s.xs[i])) + "," + detail::fmt2(py(s.ys[i]));
    out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"" +
           (s.dashed ? std::string(" stroke-dasharray=\"5,3\"") : std::string()) + " points=\"" + pts + "\"/>\n";
    const double ly = kTop + 12 + 18.0 * static_cast<double>(k);
    out += "<line x1=\"" + detail::fmt2(kW - kRight + 10) + "\" y1=\"" + detail::fmt2(ly) + "\" x2=\"" +
           detail::fmt2(kW - kRight + 30) + "\" y2=\"" + detail::fmt2(ly) + "\" stroke=\"" + color + "\"" +
           (s.dashed ? std::string(" stroke-dasharray=\"5,3\"") : std::string()) + "/>\n";
    out += "<text x=\"" + detail::fmt2(kW - kRight + 34) + "\" y=\"" + detail::fmt2(ly + 4) + "\" font-size=\"11\">" +
           detail::escape_xml(s.label) + "</text>\n";
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

inline void write_svg(const std::string& path, const LinePlot& plot) {
  const std::string text = render_svg(plot);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
}

}  // namespace pcflow::bench
