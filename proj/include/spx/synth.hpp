// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spx/rng.hpp"

namespace spx {

/// One sinusoidal component. drift_hz_per_s linearly wanders the
/// instantaneous frequency: f(t) = freq_hz + drift_hz_per_s * t.
struct Tone {
  double freq_hz = 0.0;
  double amplitude = 0.0;
  double drift_hz_per_s = 0.0;
};

/// A stack of harmonically related lines: line k (k = 1..count) sits at
/// k * fundamental_hz with amplitude rolloff^k.
struct HarmonicStack {
  double fundamental_hz = 0.0;
  int count = 0;
  double rolloff = 0.0;
};

/// Synthetic stand-in for one emitting device. The tone/harmonic line
/// frequencies are the ground truth that explanation recall is measured
/// against downstream.
struct DeviceSpec {
  int class_id = 0;
  std::string name;
  std::vector<Tone> tones;
  std::vector<HarmonicStack> harmonics;
  double noise_floor_sigma = 0.0;  // white Gaussian noise, linear amplitude
  double mains_residue_amp = 0.0;  // residual 60 Hz leakage, linear amplitude
  int64_t n_samples = 0;           // raw signal length for this class (W_D)

  /// All ground-truth line frequencies: tones plus expanded harmonic lines.
  std::vector<double> line_frequencies() const;
};

struct DatasetManifest {
  double sample_rate = 2'000'000.0;
  double train_fraction = 0.8;  // f_Tr, in (0, 1)
  uint64_t seed = 42;
  std::vector<DeviceSpec> classes;

  /// Checks manifest invariants for a given analysis window length:
  /// unique class ids, component frequencies inside (0, Nyquist),
  /// nonnegative amplitudes, 0 < train_fraction < 1, and per-class
  /// n_samples >= 2 * window_samples + 2 so both sampling intervals are
  /// nonempty. Throws std::invalid_argument with a specific message.
  void validate(int64_t window_samples) const;

  const DeviceSpec& spec_for(int class_id) const;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);
};

enum class Split : uint8_t { kTrain = 0, kValidation = 1 };

struct WindowSample {
  int class_id = 0;
  int64_t start = 0;
  int64_t length = 0;
  Split split = Split::kTrain;
};

/// Inclusive start-index bounds for the two sampling intervals.
/// Training starts lie in [0, train_start_max]; validation starts in
/// [validation_start_min, validation_start_max]. The gap of exactly one
/// window length between the intervals guarantees the raw-sample ranges
/// never overlap.
int64_t train_start_max(int64_t n_samples, int64_t window_samples, double train_fraction);
int64_t validation_start_min(int64_t n_samples, int64_t window_samples, double train_fraction);
int64_t validation_start_max(int64_t n_samples, int64_t window_samples);

/// Synthesizes the raw signal for one device spec. Deterministic for a
/// given (spec, n_samples, sample_rate, seed): component phases come from
/// the seeded stream, so analysis windows are not phase-locked to any
/// component. Samples are synthesized in double and stored as float.
std::vector<float> synthesize_signal(const DeviceSpec& spec, int64_t n_samples,
                                     double sample_rate, uint64_t seed);

/// Draws one window location: class uniform over the manifest's classes,
/// start uniform over the chosen split's interval. Throws if the interval
/// is empty for the chosen class.
WindowSample sample_window(const DatasetManifest& manifest, int64_t window_samples,
                           Split split, Rng& rng);

/// Exact contiguous slice [start, start + length). Out-of-range is a hard
/// error, never a silent truncation.
std::vector<float> extract_window(std::span<const float> signal, const WindowSample& sample);

// Raw signal container ("SIG1"): magic, u32 version, u64 sample count,
// f64 sample_rate, then samples as f32 little-endian.
void save_signal(const std::filesystem::path& path, std::span<const float> signal,
                 double sample_rate);
std::vector<float> load_signal(const std::filesystem::path& path, double* sample_rate_out);

}  // namespace spx
