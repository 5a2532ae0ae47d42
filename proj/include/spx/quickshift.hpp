// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spx/exec.hpp"
#include "spx/stft.hpp"

namespace spx {

// Defaults calibrated on the class-0 golden spectrogram: ~220 segments,
// with every class landing in the low hundreds. max_dist follows the
// usual small-multiple-of-kernel choice.
struct QuickshiftParams {
  double kernel_size = 3.0;        // Parzen density bandwidth, pixels
  double max_dist = 6.0;           // tree-link cutoff, pixels
  double color_multiplier = 10.0;  // value scale before distance computation

  void validate() const;  // kernel_size > 0, max_dist > 0
};

/// Per-pixel segment labels partitioning a grid. Labels are canonical:
/// ids appear in order of first row-major occurrence, every id in
/// [0, n_segments) is used, and every segment is 4-connected.
struct SuperpixelMap {
  int rows = 0, cols = 0;
  int n_segments = 0;
  std::vector<uint32_t> labels;  // row-major

  uint32_t at(int r, int c) const { return labels[static_cast<size_t>(r) * cols + c]; }
};

/// Mode-seeking segmentation over the 3-D feature space
/// (row, col, color_multiplier * value):
///   1. Parzen density per pixel: sum of exp(-d^2 / (2*kernel_size^2))
///      over the window |dy|,|dx| <= ceil(3*kernel_size), self included,
///      accumulated in (dy, dx) order.
///   2. Each pixel links to the feature-space-nearest pixel with higher
///      density within max_dist (full 3-D distance); density ties break
///      toward the smaller row-major index, distance ties likewise.
///   3. Link-tree roots seed segments; a post-pass splits 4-disconnected
///      segments into fresh ids and relabels canonically.
/// Deterministic: output is independent of execution order.
SuperpixelMap quickshift(const Spectrogram& img, const QuickshiftParams& params,
                         Exec exec = Exec::kParallel);

namespace ref {
/// Brute-force reference: all-pairs scans with the same documented
/// density/link rules, no windowed iteration or precomputed tables.
/// Produces bit-identical labels to the production kernel.
SuperpixelMap quickshift(const Spectrogram& img, const QuickshiftParams& params);
}  // namespace ref

// Segment map container ("SEG1"): magic, u32 version, u32 rows, u32 cols,
// u32 n_segments, then u32 little-endian labels row-major.
void save_segments(const std::filesystem::path& path, const SuperpixelMap& m);
SuperpixelMap load_segments(const std::filesystem::path& path);

}  // namespace spx
