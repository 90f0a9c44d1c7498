#include "mlink/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace mlink {

namespace {

constexpr double kCanvas = 800.0;

const char* kPalette[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231",
                          "#911eb4", "#46f0f0", "#f032e6", "#bcf60c",
                          "#008080", "#9a6324"};
constexpr int kPaletteSize = 10;

struct View {
  double min_x, min_y, scale;
  double px(double x) const { return (x - min_x) * scale; }
  double py(double y) const { return kCanvas - (y - min_y) * scale; }
};

void appendf(std::string& out, const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  out += buf;
}

void append_curve(std::string& out, const StructureResult& s, const PointSet& data,
                  const View& v, const char* color) {
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  for (int i : s.members) {
    lo_x = std::min(lo_x, data.points[i][0]);
    hi_x = std::max(hi_x, data.points[i][0]);
  }
  const auto& p = s.model.params;
  if (s.class_id == "circle") {
    appendf(out,
            "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"%.3f\" fill=\"none\" "
            "stroke=\"%s\" stroke-width=\"1.5\"/>\n",
            v.px(p[0]), v.py(p[1]), p[2] * v.scale, color);
    return;
  }
  if (s.class_id == "line") {
    // stroke across the structure's own extent along the line direction
    const double ax = p[2] * p[0], ay = p[2] * p[1];
    const double dx = -p[1], dy = p[0];
    double lo_t = std::numeric_limits<double>::infinity(), hi_t = -lo_t;
    for (int i : s.members) {
      const double t = dx * (data.points[i][0] - ax) + dy * (data.points[i][1] - ay);
      lo_t = std::min(lo_t, t);
      hi_t = std::max(hi_t, t);
    }
    appendf(out,
            "<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\" "
            "stroke=\"%s\" stroke-width=\"1.5\"/>\n",
            v.px(ax + lo_t * dx), v.py(ay + lo_t * dy), v.px(ax + hi_t * dx),
            v.py(ay + hi_t * dy), color);
    return;
  }
  if (s.class_id == "parabola") {
    // a quadratic Bezier reproduces the arc exactly
    const double a = p[0], b = p[1], c = p[2];
    auto f = [&](double x) { return (a * x + b) * x + c; };
    const double mx = 0.5 * (lo_x + hi_x);
    const double ctrl_y = f(lo_x) + (2.0 * a * lo_x + b) * (mx - lo_x);
    appendf(out,
            "<path d=\"M %.3f %.3f Q %.3f %.3f %.3f %.3f\" fill=\"none\" "
            "stroke=\"%s\" stroke-width=\"1.5\"/>\n",
            v.px(lo_x), v.py(f(lo_x)), v.px(mx), v.py(ctrl_y), v.px(hi_x),
            v.py(f(hi_x)), color);
    return;
  }
  // unknown classes: points only
}

}  // namespace

std::string render_svg(const PointSet& data, const Segmentation& seg) {
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_y;
  for (const auto& p : data.points) {
    min_x = std::min(min_x, p[0]);
    max_x = std::max(max_x, p[0]);
    min_y = std::min(min_y, p[1]);
    max_y = std::max(max_y, p[1]);
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
  const double pad = 0.05 * span;
  View v{min_x - pad, min_y - pad, kCanvas / (span + 2.0 * pad)};

  std::vector<int> color_of(data.size(), -1);
  for (std::size_t k = 0; k < seg.structures.size(); ++k)
    for (int i : seg.structures[k].members)
      color_of[i] = static_cast<int>(k % kPaletteSize);

  std::string out;
  out.reserve(1 << 16);
  appendf(out,
          "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" "
          "height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
          kCanvas, kCanvas, kCanvas, kCanvas);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int i = 0; i < data.size(); ++i) {
    const char* color = color_of[i] >= 0 ? kPalette[color_of[i]] : "#9e9e9e";
    appendf(out, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"3\" fill=\"%s\"/>\n",
            v.px(data.points[i][0]), v.py(data.points[i][1]), color);
  }
  for (std::size_t k = 0; k < seg.structures.size(); ++k)
    append_curve(out, seg.structures[k], data, v,
                 kPalette[k % kPaletteSize]);
  out += "</svg>\n";
  return out;
}

}  // namespace mlink
