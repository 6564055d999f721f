#include "saber/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "saber/error.hpp"

namespace saber {

namespace {

constexpr double kWidth = 800, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Round magnitude label: trims trailing zeros so ticks stay short.
std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series, const std::vector<SvgBand>& bands) {
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const SvgSeries& s : series) {
    if (s.x.size() != s.y.size())
      raise(ErrorKind::SizeMismatch, "plot series '" + s.label + "' has mismatched x/y lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (!(x_min < x_max)) {
    x_min = 0;
    x_max = 1;
  }
  if (!(y_min < y_max)) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * pw; };
  const auto py = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * ph; };

  std::ofstream f(path);
  if (!f) raise(ErrorKind::Io, "cannot write " + path.string());
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << num(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
    << title << "</text>\n";

  // Frame and ticks.
  f << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 5.0;
    const double yv = y_min + (y_max - y_min) * i / 5.0;
    f << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\""
      << num(px(xv)) << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(kTop + ph + 18)
      << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
    f << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(yv)) << "\" x2=\""
      << num(kLeft) << "\" y2=\"" << num(py(yv)) << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(yv) + 4)
      << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  f << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12)
    << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  f << "<text x=\"18\" y=\"" << num(kTop + ph / 2)
    << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << num(kTop + ph / 2) << ")\">"
    << y_label << "</text>\n";

  // Zero line when the y range spans it.
  if (y_min < 0.0 && y_max > 0.0)
    f << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(0)) << "\" x2=\""
      << num(kLeft + pw) << "\" y2=\"" << num(py(0))
      << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";

  // Significance bars hug the bottom of the plot area.
  for (const SvgBand& band : bands)
    f << "<rect x=\"" << num(px(band.x0)) << "\" y=\"" << num(kTop + ph - 8) << "\" width=\""
      << num(std::max(1.0, px(band.x1) - px(band.x0))) << "\" height=\"6\" fill=\"#444444\""
      << " fill-opacity=\"0.6\"/>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const SvgSeries& s = series[si];
    f << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    bool open = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) continue;  // gaps simply skip points
      if (open) f << ' ';
      f << num(px(s.x[i])) << ',' << num(py(s.y[i]));
      open = true;
    }
    f << "\"/>\n";
    // Legend swatch and label in the top-right corner.
    const double ly = kTop + 14 + 16 * static_cast<double>(si);
    f << "<line x1=\"" << num(kLeft + pw - 120) << "\" y1=\"" << num(ly) << "\" x2=\""
      << num(kLeft + pw - 100) << "\" y2=\"" << num(ly) << "\" stroke=\"" << s.color
      << "\" stroke-width=\"2\"/>\n";
    f << "<text x=\"" << num(kLeft + pw - 94) << "\" y=\"" << num(ly + 4) << "\">" << s.label
      << "</text>\n";
  }
  f << "</svg>\n";
  if (!f.good()) raise(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace saber
