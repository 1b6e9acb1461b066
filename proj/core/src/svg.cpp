#include "puq/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "puq/errors.hpp"

namespace puq {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 20.0;
constexpr double kTop = 32.0;
constexpr double kBottom = 52.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Certainty ramp: red at 0 through to blue at 1.
std::string certainty_color(double c) {
  c = std::min(1.0, std::max(0.0, c));
  const int r = static_cast<int>(std::lround(215.0 + (69.0 - 215.0) * c));
  const int g = static_cast<int>(std::lround(48.0 + (117.0 - 48.0) * c));
  const int b = static_cast<int>(std::lround(39.0 + (180.0 - 39.0) * c));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

struct Frame {
  double x_max = 1.0;  // data range [0, x_max] x [0, 1]

  double px(double x) const { return kLeft + (x / x_max) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - y * (kHeight - kTop - kBottom); }
};

std::ofstream open_svg(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  return out;
}

void draw_axes(std::ofstream& out, const Frame& f, const std::string& x_label,
               const std::string& y_label, int x_ticks, int y_ticks, double y_scale) {
  out << "<g stroke=\"black\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\""
      << num(f.px(f.x_max)) << "\" y2=\"" << num(f.py(0)) << "\"/>\n";
  out << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\""
      << num(f.px(0)) << "\" y2=\"" << num(f.py(1)) << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int i = 0; i <= x_ticks; ++i) {
    const double x = f.x_max * i / x_ticks;
    out << "<line x1=\"" << num(f.px(x)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\""
        << num(f.px(x)) << "\" y2=\"" << num(f.py(0) + 4) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(f.px(x)) << "\" y=\"" << num(f.py(0) + 16)
        << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
  }
  for (int i = 0; i <= y_ticks; ++i) {
    const double y = static_cast<double>(i) / y_ticks;
    out << "<line x1=\"" << num(f.px(0) - 4) << "\" y1=\"" << num(f.py(y)) << "\" x2=\""
        << num(f.px(0)) << "\" y2=\"" << num(f.py(y)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(f.px(0) - 8) << "\" y=\"" << num(f.py(y) + 4)
        << "\" text-anchor=\"end\">" << num(y * y_scale) << "</text>\n";
  }
  out << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 14)
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << num((kTop + kHeight - kBottom) / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((kTop + kHeight - kBottom) / 2) << ")\">" << y_label << "</text>\n";
  out << "</g>\n";
}

}  // namespace

void emit_eac_scatter(std::span<const SampleStats> stats, std::span<const EntropyBin> bins,
                      const std::optional<RegressionLine>& regression, std::size_t num_classes,
                      const std::string& title, const std::string& path) {
  Frame f;
  f.x_max = std::log(static_cast<double>(num_classes));
  auto out = open_svg(path);

  out << "<text x=\"" << num(kWidth / 2)
      << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" << title
      << "</text>\n";
  draw_axes(out, f, "entropy (nats)", "accuracy", 5, 4, 1.0);

  out << "<clipPath id=\"plot\"><rect x=\"" << num(f.px(0)) << "\" y=\"" << num(f.py(1))
      << "\" width=\"" << num(f.px(f.x_max) - f.px(0)) << "\" height=\""
      << num(f.py(0) - f.py(1)) << "\"/></clipPath>\n";

  out << "<g clip-path=\"url(#plot)\">\n";
  for (const auto& s : stats) {
    out << "<circle cx=\"" << num(f.px(s.entropy)) << "\" cy=\"" << num(f.py(s.mean_correct))
        << "\" r=\"2\" fill=\"" << certainty_color(s.certainty) << "\" fill-opacity=\"0.5\"/>\n";
  }
  if (regression) {
    const double y0 = regression->intercept;
    const double y1 = regression->intercept + regression->slope * f.x_max;
    out << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(y0)) << "\" x2=\""
        << num(f.px(f.x_max)) << "\" y2=\"" << num(f.py(y1))
        << "\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
  }
  for (const auto& b : bins) {
    const double cx = f.px((b.lo + b.hi) / 2.0);
    const double cy = f.py(b.accuracy);
    out << "<path d=\"M" << num(cx - 5) << " " << num(cy - 5) << " L" << num(cx + 5) << " "
        << num(cy + 5) << " M" << num(cx - 5) << " " << num(cy + 5) << " L" << num(cx + 5) << " "
        << num(cy - 5) << "\" stroke=\"black\" stroke-width=\"2.5\"/>\n";
  }
  out << "</g>\n";
  out << "</svg>\n";
  if (!out) throw IoError("write failed for " + path);
}

void emit_eac_bars(std::span<const PerClassRow> rows, const std::string& title,
                   const std::string& path) {
  Frame f;
  f.x_max = static_cast<double>(rows.size());
  auto out = open_svg(path);

  out << "<text x=\"" << num(kWidth / 2)
      << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" << title
      << "</text>\n";

  // y axis in percent
  out << "<g stroke=\"black\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\""
      << num(f.px(f.x_max)) << "\" y2=\"" << num(f.py(0)) << "\"/>\n";
  out << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\""
      << num(f.px(0)) << "\" y2=\"" << num(f.py(1)) << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = static_cast<double>(i) / 4.0;
    out << "<text x=\"" << num(f.px(0) - 8) << "\" y=\"" << num(f.py(y) + 4)
        << "\" text-anchor=\"end\">" << num(y * 100.0) << "</text>\n";
  }
  out << "<text x=\"16\" y=\"" << num((kTop + kHeight - kBottom) / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((kTop + kHeight - kBottom) / 2) << ")\">percent</text>\n";

  const char* colors[3] = {"#ff7f0e", "#2ca02c", "#1f77b4"};
  const char* names[3] = {"entropy %", "accuracy %", "certainty %"};
  for (int i = 0; i < 3; ++i) {
    const double lx = kLeft + 12 + 130.0 * i;
    out << "<rect x=\"" << num(lx) << "\" y=\"" << num(kTop + 2) << "\" width=\"10\" height=\"10\" fill=\""
        << colors[i] << "\"/>\n";
    out << "<text x=\"" << num(lx + 14) << "\" y=\"" << num(kTop + 11) << "\">" << names[i]
        << "</text>\n";
  }
  out << "</g>\n";

  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  bool warned = false;
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto& row = rows[c];
    const double group_lo = f.px(static_cast<double>(c));
    const double group_w = f.px(1.0) - f.px(0.0);
    const double bar_w = group_w / 4.0;
    const double values[3] = {row.entropy_pct, row.accuracy * 100.0, row.certainty * 100.0};
    if (row.count > 0) {
      for (int i = 0; i < 3; ++i) {
        double v = values[i];
        if (v < 0.0 || v > 100.0) {
          if (!warned) {
            std::cerr << "emit_eac_bars: value " << v << " outside [0,100], clipping\n";
            warned = true;
          }
          v = std::min(100.0, std::max(0.0, v));
        }
        const double x = group_lo + bar_w * (0.5 + i);
        const double y = f.py(v / 100.0);
        out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_w * 0.9)
            << "\" height=\"" << num(f.py(0) - y) << "\" fill=\"" << colors[i] << "\"/>\n";
      }
    }
    out << "<text x=\"" << num(group_lo + group_w / 2) << "\" y=\"" << num(f.py(0) + 16)
        << "\" text-anchor=\"middle\">" << row.label << "</text>\n";
  }
  out << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 14)
      << "\" text-anchor=\"middle\">class</text>\n";
  out << "</g>\n";
  out << "</svg>\n";
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace puq
