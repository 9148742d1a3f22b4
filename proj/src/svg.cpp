#include "alcorpus/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "alcorpus/errors.hpp"

namespace alcorpus::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string render(const Chart& chart) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : chart.series) {
    if (s.xs.size() != s.ys.size() || (!s.errors.empty() && s.errors.size() != s.ys.size()))
      throw ValidationError("svg series '" + s.name + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      const double e = s.errors.empty() ? 0.0 : s.errors[i];
      x_lo = std::min(x_lo, s.xs[i]);
      x_hi = std::max(x_hi, s.xs[i]);
      y_lo = std::min(y_lo, s.ys[i] - e);
      y_hi = std::max(y_hi, s.ys[i] + e);
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (x_hi == x_lo) x_hi = x_lo + 1;
  if (y_hi == y_lo) y_hi = y_lo + 1;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  const double left = 70, right = 150, top = 40, bottom = 50;
  const double pw = chart.width - left - right, ph = chart.height - top - bottom;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(chart.width) << "\" height=\""
    << num(chart.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(chart.width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(chart.title) << "</text>\n";
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / 4.0, fy = y_lo + (y_hi - y_lo) * i / 4.0;
    o << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(top + ph + 16)
      << "\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n";
    o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(fy) + 4)
      << "\" text-anchor=\"end\">" << tick_label(fy) << "</text>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(chart.height - 10)
    << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << num(top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string path;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (i == 0) {
        path += "M" + num(px(s.xs[i])) + " " + num(py(s.ys[i]));
      } else if (s.step) {
        path += " H" + num(px(s.xs[i])) + " V" + num(py(s.ys[i]));
      } else {
        path += " L" + num(px(s.xs[i])) + " " + num(py(s.ys[i]));
      }
    }
    o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    for (std::size_t i = 0; i < s.errors.size(); ++i) {
      o << "<line x1=\"" << num(px(s.xs[i])) << "\" x2=\"" << num(px(s.xs[i])) << "\" y1=\""
        << num(py(s.ys[i] - s.errors[i])) << "\" y2=\"" << num(py(s.ys[i] + s.errors[i]))
        << "\" stroke=\"" << color << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << num(left + pw + 10) << "\" x2=\"" << num(left + pw + 30) << "\" y1=\""
      << num(ly) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(left + pw + 36) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace alcorpus::svg
