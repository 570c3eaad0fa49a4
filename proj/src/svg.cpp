#include "dart/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dart/error.hpp"

namespace dart {
namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr double kPadX = 56;
constexpr double kPadY = 40;

const char* const kPalette[] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

}  // namespace

std::string build_scatter_svg(const Matrix& points, const std::vector<std::string>& labels,
                              const std::string& title) {
  if (points.cols() != 2) throw DimensionError("scatter: points must be N x 2");
  if (static_cast<std::size_t>(points.rows()) != labels.size()) {
    throw DimensionError("scatter: point and label counts differ");
  }
  if (points.rows() < 1) throw InsufficientDataError("scatter: no points");

  std::map<std::string, std::string> color_of;
  for (const auto& label : labels) color_of[label];
  std::size_t next = 0;
  for (auto& [label, color] : color_of) color = kPalette[next++ % kPaletteSize];

  double min_x = points.col(0).minCoeff(), max_x = points.col(0).maxCoeff();
  double min_y = points.col(1).minCoeff(), max_y = points.col(1).maxCoeff();
  const double span_x = max_x - min_x, span_y = max_y - min_y;
  min_x -= span_x > 0 ? 0.05 * span_x : 1.0;
  max_x += span_x > 0 ? 0.05 * span_x : 1.0;
  min_y -= span_y > 0 ? 0.05 * span_y : 1.0;
  max_y += span_y > 0 ? 0.05 * span_y : 1.0;

  const double plot_w = kWidth - 2 * kPadX;
  const double plot_h = kHeight - 2 * kPadY;
  auto sx = [&](double x) { return kPadX + (x - min_x) / (max_x - min_x) * plot_w; };
  auto sy = [&](double y) { return kHeight - kPadY - (y - min_y) / (max_y - min_y) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  svg << "<rect x=\"" << fmt(kPadX) << "\" y=\"" << fmt(kPadY) << "\" width=\"" << fmt(plot_w)
      << "\" height=\"" << fmt(plot_h)
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";

  for (Index i = 0; i < points.rows(); ++i) {
    svg << "<circle cx=\"" << fmt(sx(points(i, 0))) << "\" cy=\"" << fmt(sy(points(i, 1)))
        << "\" r=\"3.5\" fill=\"" << color_of[labels[static_cast<std::size_t>(i)]]
        << "\" fill-opacity=\"0.75\"/>\n";
  }

  double ly = kPadY + 14;
  for (const auto& [label, color] : color_of) {
    svg << "<rect x=\"" << fmt(kWidth - kPadX + 10) << "\" y=\"" << fmt(ly - 8)
        << "\" width=\"8\" height=\"8\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << fmt(kWidth - kPadX + 24) << "\" y=\"" << fmt(ly)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(label) << "</text>\n";
    ly += 16;
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_scatter_svg(const std::string& path, const Matrix& points,
                       const std::vector<std::string>& labels, const std::string& title) {
  const std::string body = build_scatter_svg(points, labels, title);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace dart
