// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spx/aggregate.hpp"
#include "spx/cnn.hpp"
#include "spx/lime.hpp"
#include "spx/quickshift.hpp"
#include "spx/stft.hpp"
#include "spx/synth.hpp"

namespace spx {

/// Everything one end-to-end run needs. Loaded from JSON (all fields
/// optional, defaults below); the CLI maps flags and the
/// SPECTRO_EXPLAIN_SEED environment variable on top.
struct PipelineConfig {
  std::string manifest_path;  // empty: use the built-in default manifest
  std::string out_dir = "runs";
  int64_t window_samples = kDefaultWindowSamples;
  StftParams stft;
  QuickshiftParams quickshift;
  LimeParams lime;
  TrainConfig train;
  int c1 = 4, c2 = 8, c3 = 16;  // reference CNN channels
  int n_explanations = 400;
  int n_retrainings = 16;
  int ensemble_class = 0;
  uint64_t seed = 42;
  int jobs = 0;  // 0: library/OMP default

  void validate() const;
  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);
};

/// Manifest plus the synthesized raw signal per class, index-aligned with
/// manifest.classes.
struct Dataset {
  DatasetManifest manifest;
  std::vector<std::vector<float>> signals;

  int index_of(int class_id) const;
  const std::vector<float>& signal_for(int class_id) const;
  int n_classes() const { return static_cast<int>(manifest.classes.size()); }
};

/// Nine desk-scale classes: eight synthetic devices with four spectral
/// lines each (tones placed on exact STFT bin centers, one class using a
/// harmonic stack and one a slow drift) plus a noise-only background
/// class. Line placement overlaps between classes so no single band
/// identifies a device.
DatasetManifest default_manifest();

Dataset build_dataset(const DatasetManifest& manifest);

/// Ground-truth line positions of one class as STFT bin indices.
std::vector<int> truth_bins(const DeviceSpec& spec, const StftParams& params,
                            double sample_rate);

/// Canvas = log-scaled, unit-normalized spectrogram: the classifier input
/// and the surface segmentation/explanation operate on.
Spectrogram make_canvas(std::span<const float> window, const StftParams& params,
                        double sample_rate, uint32_t class_id, Exec exec);

/// Deterministic labeled-canvas stream drawing fresh windows per call.
SampleFn make_stream(const Dataset& data, const StftParams& params,
                     int64_t window_samples, Split split, uint64_t seed, Exec exec);

/// Fixed per-class probe spectrogram: the validation-interval start of the
/// class signal. Used for segmentation calibration and scale checks.
Spectrogram golden_canvas(const Dataset& data, int class_id, const StftParams& params,
                          Exec exec);

struct TrainedModel {
  SmallCnn model;
  EvalReport report;
};

/// Trains the reference CNN on the dataset with Alg-style online window
/// sampling; train_seed controls initialization and both streams.
TrainedModel train_on(const Dataset& data, const PipelineConfig& config,
                      uint64_t train_seed, Exec exec = Exec::kParallel);

/// Per-retraining seed for ensemble run r.
uint64_t retrain_seed(uint64_t base_seed, int run);

struct ClassExplainOutput {
  AggregatedExplanation agg;
  FrequencyProfile projection;  // lime projection over frequency
  FrequencyProfile derivative;  // |first difference| of the projection
  FrequencyProfile welch_mean;  // mean Welch spectrum of the explained windows
  double temporality = 0.0;
  int n_truncated = 0;  // explanations with fewer than top_n positive segments
};

/// Runs n_explanations LIME explanations of fresh validation windows of
/// one class and aggregates them. Explanations are independent and run in
/// parallel; every explanation i uses its own derived stream, so results
/// are byte-identical for any worker count. on_explanation (optional) is
/// invoked serially per finished explanation, in arbitrary order.
ClassExplainOutput explain_class(
    const Dataset& data, const Classifier& model, int class_id,
    const PipelineConfig& config, uint64_t seed,
    const std::function<void(int, const Explanation&)>& on_explanation = {});

}  // namespace spx
