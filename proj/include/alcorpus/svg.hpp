#pragma once

#include <string>
#include <vector>

namespace alcorpus::svg {

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> errors;  // optional symmetric error bars, same length as ys
  bool step = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  double width = 640;
  double height = 400;
};

/// Static SVG document; numbers are printed with fixed precision so the output
/// is stable across runs.
std::string render(const Chart& chart);

}  // namespace alcorpus::svg
