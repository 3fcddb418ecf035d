#include "partpredict/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace partpredict {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string svg_tree_overlay(const Superblock& sb, const std::vector<LeafBlock>& leaves) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"512\" height=\"512\" "
         "viewBox=\"0 0 64 64\">\n";
  // background: 4x4 mean-luma cells
  for (int y = 0; y < 64; y += 4) {
    for (int x = 0; x < 64; x += 4) {
      int sum = 0;
      for (int dy = 0; dy < 4; ++dy) {
        for (int dx = 0; dx < 4; ++dx) sum += sb.at(y + dy, x + dx);
      }
      const int v = sum / 16;
      out << "<rect class=\"px\" x=\"" << x << "\" y=\"" << y
          << "\" width=\"4\" height=\"4\" fill=\"rgb(" << v << "," << v << "," << v
          << ")\"/>\n";
    }
  }
  for (const LeafBlock& b : leaves) {
    out << "<rect class=\"block\" x=\"" << b.col << "\" y=\"" << b.row << "\" width=\""
        << b.width << "\" height=\"" << b.height
        << "\" fill=\"none\" stroke=\"#00c020\" stroke-width=\"0.35\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<ChartSeries>& series) {
  const double width = 640.0, height = 420.0;
  const double ml = 70.0, mr = 140.0, mt = 40.0, mb = 50.0;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const ChartSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (x_lo > x_hi) {
    x_lo = 0.0;
    x_hi = 1.0;
  }
  if (y_lo > y_hi) {
    y_lo = 0.0;
    y_hi = 1.0;
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n";

  // axes and ticks
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / 5.0;
    const double fy = y_lo + (y_hi - y_lo) * i / 5.0;
    out << "<line x1=\"" << px(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(fx)
        << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(fx)
        << "</text>\n"
        << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << ml << "\" y2=\""
        << py(fy) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(fy)
        << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
      << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kColors[si % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[si].points) {
      out << fmt(px(x)) << "," << fmt(py(y)) << " ";
    }
    out << "\"/>\n";
    for (const auto& [x, y] : series[si].points) {
      out << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    const double ly = mt + 16 + 18 * static_cast<double>(si);
    out << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << ml + pw + 35 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[si].name << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace partpredict
