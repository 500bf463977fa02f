#pragma once

// Minimal static SVG charts for experiment reports.

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lanmax {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  bool line = true;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Series> series;
  std::optional<double> baseline;  // horizontal reference line

  std::string svg() const;
};

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> samples);
double quantile(const std::vector<double>& sorted, double q);

struct BoxPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> labels;
  std::vector<BoxStats> boxes;
  std::optional<double> baseline;

  std::string svg() const;
};

}  // namespace lanmax
