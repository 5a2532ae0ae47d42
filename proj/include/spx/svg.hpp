// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spx {

/// Minimal SVG plot emission. Plots are conveniences; the CSV/JSON
/// artifacts next to them are the source of truth. Every file embeds a
/// provenance comment naming the data it was rendered from.
struct SvgSeries {
  std::string label;
  std::string color;  // e.g. "#1f77b4"
  std::vector<double> x, y;
  bool unit_max = false;  // normalize y to max 1 for overlaying scales
};

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series,
                     const std::string& provenance);

/// Row-major grid rendered with run-length rects, 64 quantization levels.
void write_heatmap(const std::filesystem::path& path, const std::string& title,
                   const float* values, int rows, int cols,
                   const std::string& provenance);

void write_matrix_table(const std::filesystem::path& path, const std::string& title,
                        const std::vector<std::vector<int64_t>>& cells,
                        const std::string& provenance);

}  // namespace spx
