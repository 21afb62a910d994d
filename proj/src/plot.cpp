#include "psn/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "psn/error.hpp"

namespace psn {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(std::span<const AggregateRow> rows, const PlotOptions& opt) {
  std::map<std::string, std::vector<AggregateRow>> series;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!series.contains(r.series)) order.push_back(r.series);
    series[r.series].push_back(r);
  }

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& r : rows) {
    x_min = std::min(x_min, static_cast<double>(r.episode));
    x_max = std::max(x_max, static_cast<double>(r.episode));
    for (double v : {r.median, r.p25, r.p75}) {
      if (!std::isfinite(v)) continue;
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  if (!std::isfinite(x_min)) x_min = 0.0, x_max = 1.0;
  if (!std::isfinite(y_min)) y_min = 0.0, y_max = 1.0;
  if (x_max <= x_min) x_max = x_min + 1.0;
  if (y_max <= y_min) {
    const double pad = std::max(1.0, std::abs(y_min) * 0.1);
    y_min -= pad;
    y_max += pad;
  }

  const double left = 70, right = 160, top = 40, bottom = 55;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
      << opt.height << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << escape(opt.title) << "</text>\n";

  for (int i = 0; i <= 5; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 5.0;
    const double yv = y_min + (y_max - y_min) * i / 5.0;
    svg << "<line x1=\"" << num(sx(xv)) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(sx(xv))
        << "\" y2=\"" << num(top + ph + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(xv) << "</text>\n";
    svg << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(sy(yv)) << "\" x2=\"" << num(left)
        << "\" y2=\"" << num(sy(yv)) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(left - 8) << "\" y=\"" << num(sy(yv) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << tick_label(yv)
        << "</text>\n";
  }
  svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(opt.height - 12)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape(opt.x_label) << "</text>\n";
  svg << "<text x=\"18\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 "
      << num(top + ph / 2) << ")\">" << escape(opt.y_label) << "</text>\n";

  for (std::size_t s = 0; s < order.size(); ++s) {
    const auto& pts = series[order[s]];
    const char* color = kPalette[s % std::size(kPalette)];
    std::ostringstream band, line;
    for (const auto& p : pts) band << num(sx(p.episode)) << ',' << num(sy(p.p75)) << ' ';
    for (auto it = pts.rbegin(); it != pts.rend(); ++it)
      band << num(sx(it->episode)) << ',' << num(sy(it->p25)) << ' ';
    for (const auto& p : pts) line << num(sx(p.episode)) << ',' << num(sy(p.median)) << ' ';
    svg << "<polygon class=\"iqr\" points=\"" << band.str() << "\" fill=\"" << color
        << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    svg << "<polyline class=\"median\" points=\"" << line.str() << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(s);
    svg << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(left + pw + 32) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"3\"/>\n";
    svg << "<text x=\"" << num(left + pw + 36) << "\" y=\"" << num(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(order[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_svg(std::span<const AggregateRow> rows, const std::string& path,
               const PlotOptions& options) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << render_svg(rows, options);
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace psn
