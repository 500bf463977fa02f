#include "lanmax/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lanmax {

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 460;
constexpr double kLeft = 70;
constexpr double kRight = 190;
constexpr double kTop = 40;
constexpr double kBottom = 60;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

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

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double t(double v) const {
    if (log) return (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
    return (v - lo) / (hi - lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int e = static_cast<int>(std::floor(std::log10(lo))); e <= static_cast<int>(std::ceil(std::log10(hi))); ++e) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) out.push_back(v);
      }
      return out;
    }
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (raw <= m * mag) {
        step = m * mag;
        break;
      }
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(v);
    return out;
  }
};

Axis fit_axis(double lo, double hi, bool log) {
  Axis a;
  a.log = log;
  if (!(lo <= hi)) {
    lo = log ? 1e-3 : 0.0;
    hi = 1.0;
  }
  if (log) {
    if (lo == hi) {
      lo /= 2;
      hi *= 2;
    }
    a.lo = lo / 1.25;
    a.hi = hi * 1.25;
  } else {
    const double pad = (hi - lo) > 0 ? 0.05 * (hi - lo) : std::max(1.0, std::abs(hi) * 0.05);
    a.lo = lo - pad;
    a.hi = hi + pad;
  }
  return a;
}

class Canvas {
 public:
  Canvas(const std::string& title) {
    os_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"white\"/>\n"
        << "<text x=\"" << (kLeft + (kWidth - kLeft - kRight) / 2) << "\" y=\"24\" "
        << "font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">" << escape(title)
        << "</text>\n";
  }

  double px(const Axis& x, double v) const { return kLeft + x.t(v) * (kWidth - kLeft - kRight); }
  double py(const Axis& y, double v) const {
    return kHeight - kBottom - y.t(v) * (kHeight - kTop - kBottom);
  }

  void frame(const Axis& x, const Axis& y, const std::string& xl, const std::string& yl,
             bool x_ticks = true) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    os_ << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << (x1 - x0) << "\" height=\""
        << (y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    if (x_ticks) {
      for (double v : x.ticks()) {
        const double p = px(x, v);
        os_ << "<line x1=\"" << p << "\" y1=\"" << y0 << "\" x2=\"" << p << "\" y2=\"" << y1
            << "\" stroke=\"#dddddd\" stroke-dasharray=\"3,3\"/>\n"
            << "<text x=\"" << p << "\" y=\"" << (y0 + 16) << "\" font-family=\"sans-serif\" "
            << "font-size=\"11\" text-anchor=\"middle\">" << num(v) << "</text>\n";
      }
    }
    for (double v : y.ticks()) {
      const double p = py(y, v);
      os_ << "<line x1=\"" << x0 << "\" y1=\"" << p << "\" x2=\"" << x1 << "\" y2=\"" << p
          << "\" stroke=\"#dddddd\" stroke-dasharray=\"3,3\"/>\n"
          << "<text x=\"" << (x0 - 6) << "\" y=\"" << (p + 4) << "\" font-family=\"sans-serif\" "
          << "font-size=\"11\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
    os_ << "<text x=\"" << ((x0 + x1) / 2) << "\" y=\"" << (kHeight - 18) << "\" "
        << "font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" << escape(xl)
        << "</text>\n"
        << "<text x=\"18\" y=\"" << ((y0 + y1) / 2) << "\" font-family=\"sans-serif\" "
        << "font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << ((y0 + y1) / 2)
        << ")\">" << escape(yl) << "</text>\n";
  }

  void hline(const Axis& y, double v, const std::string& color) {
    const double p = py(y, v);
    os_ << "<line x1=\"" << kLeft << "\" y1=\"" << p << "\" x2=\"" << (kWidth - kRight)
        << "\" y2=\"" << p << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
  }

  void legend(std::size_t i, const std::string& name, const std::string& color) {
    const double x = kWidth - kRight + 12;
    const double y = kTop + 10 + 18 * static_cast<double>(i);
    os_ << "<rect x=\"" << x << "\" y=\"" << (y - 8) << "\" width=\"12\" height=\"12\" fill=\""
        << color << "\"/>\n"
        << "<text x=\"" << (x + 18) << "\" y=\"" << (y + 2) << "\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << escape(name) << "</text>\n";
  }

  std::ostringstream& raw() { return os_; }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  std::ostringstream os_;
};

}  // namespace

std::string LinePlot::svg() const {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const Series& s : series) {
    for (auto [x, y] : s.points) {
      if (log_x && !(x > 0)) continue;
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  }
  if (baseline) {
    ylo = std::min(ylo, *baseline);
    yhi = std::max(yhi, *baseline);
  }
  const Axis xa = fit_axis(xlo, xhi, log_x);
  const Axis ya = fit_axis(ylo, yhi, false);
  Canvas c(title);
  c.frame(xa, ya, x_label, y_label);
  if (baseline) c.hline(ya, *baseline, "#d62728");
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const std::string color = kPalette[i % std::size(kPalette)];
    std::vector<std::pair<double, double>> pts;
    for (auto [x, y] : s.points) {
      if (log_x && !(x > 0)) continue;
      pts.emplace_back(c.px(xa, x), c.py(ya, y));
    }
    if (s.line && pts.size() > 1) {
      c.raw() << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < pts.size(); ++k) {
        c.raw() << (k ? " " : "") << pts[k].first << ',' << pts[k].second;
      }
      c.raw() << "\"/>\n";
    }
    for (auto [x, y] : pts) {
      c.raw() << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << color
              << "\"/>\n";
    }
    c.legend(i, s.name, color);
  }
  return c.finish();
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("box_stats of empty sample");
  std::sort(samples.begin(), samples.end());
  return {samples.front(), quantile(samples, 0.25), quantile(samples, 0.5),
          quantile(samples, 0.75), samples.back()};
}

std::string BoxPlot::svg() const {
  double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
  for (const BoxStats& b : boxes) {
    ylo = std::min(ylo, b.min);
    yhi = std::max(yhi, b.max);
  }
  if (baseline) {
    ylo = std::min(ylo, *baseline);
    yhi = std::max(yhi, *baseline);
  }
  Axis xa;
  xa.lo = 0.0;
  xa.hi = static_cast<double>(boxes.size()) + 1.0;
  const Axis ya = fit_axis(ylo, yhi, false);
  Canvas c(title);
  c.frame(xa, ya, x_label, y_label, false);
  const double half = 0.3 * (c.px(xa, 1.0) - c.px(xa, 0.0));
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BoxStats& b = boxes[i];
    const double x = c.px(xa, static_cast<double>(i) + 1.0);
    auto& o = c.raw();
    o << "<line x1=\"" << x << "\" y1=\"" << c.py(ya, b.min) << "\" x2=\"" << x << "\" y2=\""
      << c.py(ya, b.max) << "\" stroke=\"black\"/>\n"
      << "<rect x=\"" << (x - half) << "\" y=\"" << c.py(ya, b.q3) << "\" width=\"" << (2 * half)
      << "\" height=\"" << std::max(0.5, c.py(ya, b.q1) - c.py(ya, b.q3))
      << "\" fill=\"#aec7e8\" stroke=\"black\"/>\n"
      << "<line x1=\"" << (x - half) << "\" y1=\"" << c.py(ya, b.median) << "\" x2=\""
      << (x + half) << "\" y2=\"" << c.py(ya, b.median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << x << "\" y=\"" << (kHeight - kBottom + 16) << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\" text-anchor=\"middle\">"
      << escape(i < labels.size() ? labels[i] : std::to_string(i + 1)) << "</text>\n";
  }
  if (baseline) c.hline(ya, *baseline, "#d62728");
  return c.finish();
}

}  // namespace lanmax
