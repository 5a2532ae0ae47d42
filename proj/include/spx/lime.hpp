// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "spx/cnn.hpp"
#include "spx/exec.hpp"
#include "spx/quickshift.hpp"
#include "spx/rng.hpp"
#include "spx/stft.hpp"

namespace spx {

struct LimeParams {
  int n_samples = 1000;        // perturbation count (first mask is all-ones)
  double kernel_width = 0.25;  // proximity bandwidth over hidden fraction
  double ridge_lambda = 1.0;   // L2 on segment coefficients (intercept free)
  int top_n = 3;               // supporting superpixels to report

  void validate() const;
};

/// Explanation modes from the interface contract. Only kSupporting is
/// implemented; the others error cleanly.
enum class ExplanationMode : uint8_t { kSupporting = 0, kOpposing = 1, kInfluential = 2 };

/// Coefficients at or below this value do not count as supporting
/// evidence; a numerically-zero fit selects nothing.
inline constexpr double kMinSupportCoefficient = 1e-6;

struct Explanation {
  int rows = 0, cols = 0;
  std::vector<uint8_t> mask;  // 1 where a reported superpixel covers the pixel
  int target_class = 0;
  std::vector<double> superpixel_weights;  // local-model coefficient per segment
  double local_r2 = 0.0;
  /// Set when fewer than top_n coefficients were positive; the mask then
  /// covers only the positive ones.
  bool truncated_positive = false;

  void save(const std::filesystem::path& path) const;
  static Explanation load(const std::filesystem::path& path);
};

/// Replaces hidden segments (mask bit 0) by their per-superpixel mean
/// value; kept segments are untouched. mask_bits length must equal
/// n_segments. fills may be precomputed via segment_means().
Spectrogram perturb(const Spectrogram& canvas, const SuperpixelMap& segmap,
                    std::span<const uint8_t> mask_bits);

std::vector<float> segment_means(const Spectrogram& canvas, const SuperpixelMap& segmap);

/// LIME image explanation of one spectrogram for target_class:
///   1. Draw n_samples masks over segments (fair coin per bit; the first
///      mask is all-ones so the unperturbed point anchors the fit).
///   2. Query the classifier on each perturbed canvas for the target
///      class probability.
///   3. Fit weighted ridge of probability on mask bits, weights
///      exp(-d^2 / kernel_width^2) with d the hidden-segment fraction.
///   4. Report the union of the top_n segments with the largest positive
///      coefficients (supporting evidence only).
/// Deterministic given rng and a deterministic classifier.
Explanation explain(const Spectrogram& canvas, const SuperpixelMap& segmap,
                    const Classifier& classifier, int target_class,
                    const LimeParams& params, Rng rng,
                    ExplanationMode mode = ExplanationMode::kSupporting,
                    Exec exec = Exec::kParallel);

/// Closed-form weighted ridge: solves (X'WX + lambda*D)beta = X'Wy where
/// X is [1 | bits], D zeroes the intercept, via Cholesky. Returns the
/// n_segments + 1 coefficients (intercept first) and, optionally, the
/// weighted R^2. Exposed for the solver's own tests.
std::vector<double> weighted_ridge(const std::vector<uint8_t>& bits, int n_rows,
                                   int n_features, std::span<const double> y,
                                   std::span<const double> weights, double lambda,
                                   double* r2_out = nullptr);

}  // namespace spx
