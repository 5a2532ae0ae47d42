// SPDX-License-Identifier: Apache-2.0
#include "spx/quickshift.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "spx/io.hpp"

namespace spx {

void QuickshiftParams::validate() const {
  if (!(kernel_size > 0.0)) throw std::invalid_argument("quickshift: kernel_size must be > 0");
  if (!(max_dist > 0.0)) throw std::invalid_argument("quickshift: max_dist must be > 0");
}

namespace {

void check_finite(const Spectrogram& img) {
  if (img.rows <= 0 || img.cols <= 0 ||
      img.values.size() != static_cast<size_t>(img.rows) * img.cols)
    throw std::invalid_argument("quickshift: malformed grid");
  for (float v : img.values)
    if (!std::isfinite(v)) throw std::invalid_argument("quickshift: non-finite pixel value");
}

// Labels the link forest: follows parents to roots, then flood-fills
// 4-connected runs so every emitted segment is spatially coherent, with
// ids assigned in first-occurrence row-major order.
SuperpixelMap label_forest(int rows, int cols, std::vector<int32_t>& parent) {
  const size_t n = static_cast<size_t>(rows) * cols;
  // Path-compress to roots.
  for (size_t i = 0; i < n; ++i) {
    int32_t r = parent[i];
    while (parent[static_cast<size_t>(r)] != r) r = parent[static_cast<size_t>(r)];
    int32_t c = static_cast<int32_t>(i);
    while (parent[static_cast<size_t>(c)] != r) {
      int32_t next = parent[static_cast<size_t>(c)];
      parent[static_cast<size_t>(c)] = r;
      c = next;
    }
  }

  SuperpixelMap m;
  m.rows = rows;
  m.cols = cols;
  m.labels.assign(n, 0xffffffffu);
  std::vector<int32_t> stack;
  uint32_t next_id = 0;
  for (size_t i = 0; i < n; ++i) {
    if (m.labels[i] != 0xffffffffu) continue;
    const int32_t root = parent[i];
    m.labels[i] = next_id;
    stack.assign(1, static_cast<int32_t>(i));
    while (!stack.empty()) {
      const int32_t p = stack.back();
      stack.pop_back();
      const int pr = p / cols, pc = p % cols;
      const int32_t nb[4] = {p - cols, p + cols, p - 1, p + 1};
      const bool ok[4] = {pr > 0, pr < rows - 1, pc > 0, pc < cols - 1};
      for (int k = 0; k < 4; ++k) {
        if (!ok[k]) continue;
        const size_t q = static_cast<size_t>(nb[k]);
        if (m.labels[q] == 0xffffffffu && parent[q] == root) {
          m.labels[q] = next_id;
          stack.push_back(nb[k]);
        }
      }
    }
    ++next_id;
  }
  m.n_segments = static_cast<int>(next_id);
  return m;
}

}  // namespace

SuperpixelMap quickshift(const Spectrogram& img, const QuickshiftParams& params,
                         Exec exec) {
  params.validate();
  check_finite(img);
  const int rows = img.rows, cols = img.cols;
  const size_t n = static_cast<size_t>(rows) * cols;
  const float* v = img.values.data();
  const double m = params.color_multiplier;
  const double two_sigma2 = 2.0 * params.kernel_size * params.kernel_size;
  const int density_radius = static_cast<int>(std::ceil(3.0 * params.kernel_size));
  const int link_radius = static_cast<int>(std::ceil(params.max_dist));
  const double max_dist2 = params.max_dist * params.max_dist;

  std::vector<double> density(n, 0.0);
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const size_t i = static_cast<size_t>(r) * cols + c;
      const double vi = v[i];
      double acc = 0.0;
      const int y0 = std::max(0, r - density_radius), y1 = std::min(rows - 1, r + density_radius);
      const int x0 = std::max(0, c - density_radius), x1 = std::min(cols - 1, c + density_radius);
      for (int y = y0; y <= y1; ++y) {
        const float* row = v + static_cast<size_t>(y) * cols;
        const double dy = y - r;
        for (int x = x0; x <= x1; ++x) {
          const double dx = x - c;
          const double dv = m * (static_cast<double>(row[x]) - vi);
          const double d2 = dy * dy + dx * dx + dv * dv;
          acc += std::exp(-d2 / two_sigma2);
        }
      }
      density[i] = acc;
    }
  }

  std::vector<int32_t> parent(n);
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const size_t i = static_cast<size_t>(r) * cols + c;
      const double vi = v[i];
      const double pi = density[i];
      double best_d2 = max_dist2;
      int32_t best = static_cast<int32_t>(i);  // root unless a link is found
      bool found = false;
      const int y0 = std::max(0, r - link_radius), y1 = std::min(rows - 1, r + link_radius);
      const int x0 = std::max(0, c - link_radius), x1 = std::min(cols - 1, c + link_radius);
      for (int y = y0; y <= y1; ++y) {
        const double dy = y - r;
        for (int x = x0; x <= x1; ++x) {
          const size_t j = static_cast<size_t>(y) * cols + x;
          if (j == i) continue;
          const double pj = density[j];
          if (!(pj > pi || (pj == pi && j < i))) continue;
          const double dx = x - c;
          const double dv = m * (static_cast<double>(v[j]) - vi);
          const double d2 = dy * dy + dx * dx + dv * dv;
          // Strict < keeps the first (smallest-index) candidate on ties.
          if (d2 <= max_dist2 && (!found || d2 < best_d2)) {
            best_d2 = d2;
            best = static_cast<int32_t>(j);
            found = true;
          }
        }
      }
      parent[i] = best;
    }
  }

  return label_forest(rows, cols, parent);
}

namespace ref {

SuperpixelMap quickshift(const Spectrogram& img, const QuickshiftParams& params) {
  params.validate();
  check_finite(img);
  const int rows = img.rows, cols = img.cols;
  const size_t n = static_cast<size_t>(rows) * cols;
  const float* v = img.values.data();
  const double m = params.color_multiplier;
  const double two_sigma2 = 2.0 * params.kernel_size * params.kernel_size;
  const int density_radius = static_cast<int>(std::ceil(3.0 * params.kernel_size));
  const double max_dist2 = params.max_dist * params.max_dist;

  // All-pairs density with the window condition checked explicitly.
  std::vector<double> density(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    double acc = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const int y = static_cast<int>(j) / cols, x = static_cast<int>(j) % cols;
      if (std::abs(y - r) > density_radius || std::abs(x - c) > density_radius) continue;
      const double dy = y - r;
      const double dx = x - c;
      const double dv = m * (static_cast<double>(v[j]) - static_cast<double>(v[i]));
      const double d2 = dy * dy + dx * dx + dv * dv;
      acc += std::exp(-d2 / two_sigma2);
    }
    density[i] = acc;
  }

  std::vector<int32_t> parent(n);
  for (size_t i = 0; i < n; ++i) {
    const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    double best_d2 = max_dist2;
    int32_t best = static_cast<int32_t>(i);
    bool found = false;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!(density[j] > density[i] || (density[j] == density[i] && j < i))) continue;
      const int y = static_cast<int>(j) / cols, x = static_cast<int>(j) % cols;
      const double dy = y - r;
      const double dx = x - c;
      const double dv = m * (static_cast<double>(v[j]) - static_cast<double>(v[i]));
      const double d2 = dy * dy + dx * dx + dv * dv;
      if (d2 <= max_dist2 && (!found || d2 < best_d2)) {
        best_d2 = d2;
        best = static_cast<int32_t>(j);
        found = true;
      }
    }
    parent[i] = best;
  }

  return label_forest(rows, cols, parent);
}

}  // namespace ref

void save_segments(const std::filesystem::path& path, const SuperpixelMap& m) {
  BinaryWriter w(path);
  w.magic("SEG1");
  w.u32(1);
  w.u32(static_cast<uint32_t>(m.rows));
  w.u32(static_cast<uint32_t>(m.cols));
  w.u32(static_cast<uint32_t>(m.n_segments));
  w.u32_array(m.labels);
  w.close();
}

SuperpixelMap load_segments(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("SEG1");
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported SEG1 version " + std::to_string(version));
  SuperpixelMap m;
  m.rows = static_cast<int>(r.u32());
  m.cols = static_cast<int>(r.u32());
  m.n_segments = static_cast<int>(r.u32());
  m.labels.resize(static_cast<size_t>(m.rows) * m.cols);
  r.u32_array(m.labels);
  return m;
}

}  // namespace spx
