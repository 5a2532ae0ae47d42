// SPDX-License-Identifier: Apache-2.0
#include "spx/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "spx/io.hpp"

namespace spx {

namespace {

constexpr int kW = 900, kH = 520;
constexpr int kMarginL = 70, kMarginR = 30, kMarginT = 50, kMarginB = 55;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

void axes(std::string& svg, double x0, double x1, double y0, double y1,
          const std::string& x_label, const std::string& y_label) {
  const int px0 = kMarginL, px1 = kW - kMarginR;
  const int py0 = kH - kMarginB, py1 = kMarginT;
  svg += "<rect x='" + std::to_string(px0) + "' y='" + std::to_string(py1) + "' width='" +
         std::to_string(px1 - px0) + "' height='" + std::to_string(py0 - py1) +
         "' fill='none' stroke='#333'/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double fx = x0 + (x1 - x0) * t / 5.0;
    const double fy = y0 + (y1 - y0) * t / 5.0;
    const double px = px0 + (px1 - px0) * t / 5.0;
    const double py = py0 - (py0 - py1) * t / 5.0;
    svg += "<line x1='" + fmt(px) + "' y1='" + std::to_string(py0) + "' x2='" + fmt(px) +
           "' y2='" + std::to_string(py0 + 5) + "' stroke='#333'/>\n";
    svg += "<text x='" + fmt(px) + "' y='" + std::to_string(py0 + 20) +
           "' font-size='11' text-anchor='middle'>" + fmt(fx) + "</text>\n";
    svg += "<line x1='" + std::to_string(px0 - 5) + "' y1='" + fmt(py) + "' x2='" +
           std::to_string(px0) + "' y2='" + fmt(py) + "' stroke='#333'/>\n";
    svg += "<text x='" + std::to_string(px0 - 8) + "' y='" + fmt(py + 4) +
           "' font-size='11' text-anchor='end'>" + fmt(fy) + "</text>\n";
  }
  svg += "<text x='" + std::to_string((px0 + px1) / 2) + "' y='" + std::to_string(kH - 12) +
         "' font-size='13' text-anchor='middle'>" + escape(x_label) + "</text>\n";
  svg += "<text x='18' y='" + std::to_string((py0 + py1) / 2) +
         "' font-size='13' text-anchor='middle' transform='rotate(-90 18 " +
         std::to_string((py0 + py1) / 2) + ")'>" + escape(y_label) + "</text>\n";
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series, const std::string& provenance) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  std::vector<SvgSeries> scaled = series;
  for (auto& s : scaled) {
    if (s.unit_max) {
      double m = 0;
      for (double v : s.y) m = std::max(m, std::abs(v));
      if (m > 0)
        for (double& v : s.y) v /= m;
    }
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  y1 += (y1 - y0) * 0.05;

  std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + std::to_string(kW) +
                    "' height='" + std::to_string(kH) + "'>\n";
  svg += "<!-- provenance: " + escape(provenance) + " -->\n";
  svg += "<rect width='100%' height='100%' fill='white'/>\n";
  svg += "<text x='" + std::to_string(kW / 2) +
         "' y='28' font-size='16' text-anchor='middle'>" + escape(title) + "</text>\n";
  axes(svg, x0, x1, y0, y1, x_label, y_label);

  const int px0 = kMarginL, px1 = kW - kMarginR;
  const int py0 = kH - kMarginB, py1 = kMarginT;
  int legend_y = py1 + 16;
  for (const auto& s : scaled) {
    std::string pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double px = px0 + (px1 - px0) * (s.x[i] - x0) / (x1 - x0);
      const double py = py0 - (py0 - py1) * (s.y[i] - y0) / (y1 - y0);
      pts += fmt(px) + "," + fmt(py) + " ";
    }
    svg += "<polyline fill='none' stroke='" + s.color + "' stroke-width='1.3' points='" +
           pts + "'/>\n";
    svg += "<rect x='" + std::to_string(px1 - 190) + "' y='" + std::to_string(legend_y - 9) +
           "' width='14' height='3' fill='" + s.color + "'/>\n";
    svg += "<text x='" + std::to_string(px1 - 172) + "' y='" + std::to_string(legend_y - 4) +
           "' font-size='11'>" + escape(s.label) + (s.unit_max ? " (unit max)" : "") +
           "</text>\n";
    legend_y += 16;
  }
  svg += "</svg>\n";
  write_text_file(path, svg);
}

void write_heatmap(const std::filesystem::path& path, const std::string& title,
                   const float* values, int rows, int cols, const std::string& provenance) {
  float lo = values[0], hi = values[0];
  const size_t n = static_cast<size_t>(rows) * cols;
  for (size_t i = 0; i < n; ++i) {
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  const float span = hi > lo ? hi - lo : 1.0f;

  const int cell = std::max(1, 672 / std::max(rows, cols));
  const int gw = cols * cell, gh = rows * cell;
  const int w = gw + 100, h = gh + 70;
  std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + std::to_string(w) +
                    "' height='" + std::to_string(h) + "'>\n";
  svg += "<!-- provenance: " + escape(provenance) + " -->\n";
  svg += "<rect width='100%' height='100%' fill='white'/>\n";
  svg += "<text x='" + std::to_string(w / 2) + "' y='24' font-size='15' text-anchor='middle'>" +
         escape(title) + "</text>\n";

  // Viridis-like 5-stop ramp, 64 levels, run-length encoded per row.
  static const int stops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  auto color_of = [&](int level) {
    const double t = level / 63.0 * 4.0;
    const int s0 = std::min(3, static_cast<int>(t));
    const double f = t - s0;
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(stops[s0][0] + f * (stops[s0 + 1][0] - stops[s0][0])),
                  static_cast<int>(stops[s0][1] + f * (stops[s0 + 1][1] - stops[s0][1])),
                  static_cast<int>(stops[s0][2] + f * (stops[s0 + 1][2] - stops[s0][2])));
    return std::string(buf);
  };

  const int ox = 60, oy = 40;
  for (int r = 0; r < rows; ++r) {
    int c = 0;
    while (c < cols) {
      const int level = static_cast<int>((values[static_cast<size_t>(r) * cols + c] - lo) /
                                         span * 63.0f);
      int c2 = c + 1;
      while (c2 < cols &&
             static_cast<int>((values[static_cast<size_t>(r) * cols + c2] - lo) / span *
                              63.0f) == level)
        ++c2;
      svg += "<rect x='" + std::to_string(ox + c * cell) + "' y='" +
             std::to_string(oy + r * cell) + "' width='" + std::to_string((c2 - c) * cell) +
             "' height='" + std::to_string(cell) + "' fill='" + color_of(level) + "'/>\n";
      c = c2;
    }
  }
  svg += "<text x='" + std::to_string(ox - 8) + "' y='" + std::to_string(oy + 8) +
         "' font-size='11' text-anchor='end'>bin 0</text>\n";
  svg += "<text x='" + std::to_string(ox - 8) + "' y='" + std::to_string(oy + gh) +
         "' font-size='11' text-anchor='end'>bin " + std::to_string(rows - 1) + "</text>\n";
  svg += "<text x='" + std::to_string(ox + gw / 2) + "' y='" + std::to_string(oy + gh + 20) +
         "' font-size='12' text-anchor='middle'>time frame</text>\n";
  svg += "</svg>\n";
  write_text_file(path, svg);
}

void write_matrix_table(const std::filesystem::path& path, const std::string& title,
                        const std::vector<std::vector<int64_t>>& cells,
                        const std::string& provenance) {
  const int n = static_cast<int>(cells.size());
  int64_t mx = 1;
  for (const auto& row : cells)
    for (int64_t v : row) mx = std::max(mx, v);
  const int cell = 46;
  const int ox = 80, oy = 60;
  const int w = ox + n * cell + 40, h = oy + n * cell + 40;
  std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + std::to_string(w) +
                    "' height='" + std::to_string(h) + "'>\n";
  svg += "<!-- provenance: " + escape(provenance) + " -->\n";
  svg += "<rect width='100%' height='100%' fill='white'/>\n";
  svg += "<text x='" + std::to_string(w / 2) + "' y='26' font-size='15' text-anchor='middle'>" +
         escape(title) + "</text>\n";
  for (int i = 0; i < n; ++i) {
    svg += "<text x='" + std::to_string(ox - 10) + "' y='" +
           std::to_string(oy + i * cell + cell / 2 + 4) +
           "' font-size='11' text-anchor='end'>true " + std::to_string(i) + "</text>\n";
    svg += "<text x='" + std::to_string(ox + i * cell + cell / 2) + "' y='" +
           std::to_string(oy - 8) + "' font-size='11' text-anchor='middle'>" +
           std::to_string(i) + "</text>\n";
    for (int j = 0; j < n; ++j) {
      const double f = static_cast<double>(cells[static_cast<size_t>(i)][static_cast<size_t>(j)]) /
                       static_cast<double>(mx);
      const int shade = 255 - static_cast<int>(f * 200.0);
      char color[16];
      std::snprintf(color, sizeof color, "#%02x%02xff", shade, shade);
      svg += "<rect x='" + std::to_string(ox + j * cell) + "' y='" +
             std::to_string(oy + i * cell) + "' width='" + std::to_string(cell) +
             "' height='" + std::to_string(cell) + "' fill='" + color +
             "' stroke='#999'/>\n";
      svg += "<text x='" + std::to_string(ox + j * cell + cell / 2) + "' y='" +
             std::to_string(oy + i * cell + cell / 2 + 4) +
             "' font-size='11' text-anchor='middle'>" +
             std::to_string(cells[static_cast<size_t>(i)][static_cast<size_t>(j)]) +
             "</text>\n";
    }
  }
  svg += "</svg>\n";
  write_text_file(path, svg);
}

}  // namespace spx
