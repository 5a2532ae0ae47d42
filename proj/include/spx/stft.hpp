// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spx/exec.hpp"

namespace spx {

inline constexpr uint32_t kNoClass = 0xffffffffu;
inline constexpr int kGridSize = 224;  // classifier input is 224x224
inline constexpr int64_t kDefaultWindowSamples = 200'000;

/// Reference parameterization: n_fft = 446 gives 446/2 + 1 = 224 one-sided
/// bins, hop = 893 gives floor((200000 - 446)/893) + 1 = 224 frames. These
/// are the smallest parameters that map a 200k-sample window exactly onto
/// the 224x224 classifier input.
struct StftParams {
  int n_fft = 446;
  int hop = 893;
  enum class Window : uint8_t { kHann = 0 } window_fn = Window::kHann;
  bool log_scale = true;

  void validate() const;  // enforces the 224-bin / 224-frame contract
  int n_bins() const { return n_fft / 2 + 1; }
  int n_frames(int64_t window_len) const;
  double bin_hz(double sample_rate) const { return sample_rate / n_fft; }
  /// Nearest one-sided bin for a frequency, round(freq / bin_hz).
  int bin_of(double freq_hz, double sample_rate) const;
};

enum class ProfileKind : uint8_t {
  kWelch = 1,
  kLimeProjection = 2,
  kLimeDerivative = 3,
  kEnsembleMean = 4,
  kEnsembleStd = 5,
};

/// Grid kind tag stored in the SPC1 container.
enum class GridKind : uint8_t { kSpectrogram = 0, kAggregatedExplanation = 6 };

struct Spectrogram {
  int rows = 0;  // frequency bins, row 0 = DC
  int cols = 0;  // time frames
  std::vector<float> values;      // row-major
  std::vector<double> freq_axis;  // Hz per bin, spans [0, sample_rate/2]
  std::vector<double> time_axis;  // seconds, frame centers
  uint32_t class_id = kNoClass;
  bool log_scaled = false;

  float at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
  float& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
};

struct FrequencyProfile {
  ProfileKind kind = ProfileKind::kWelch;
  std::vector<double> values;
  int bins() const { return static_cast<int>(values.size()); }
};

/// Magnitude spectrogram of one analysis window: periodic Hann taper per
/// frame, one-sided FFT, |X|. Frames start at multiples of hop with no
/// centering or padding; window length must map exactly onto 224 frames.
/// If params.log_scale, values are log(mag + eps) with eps = 1e-10 times
/// the spectrogram's max magnitude (all-zero input stays all-zero).
Spectrogram stft(std::span<const float> window, const StftParams& params,
                 double sample_rate, Exec exec = Exec::kParallel);

/// Welch power spectrum: per-bin mean over frames of squared STFT
/// magnitude (no one-sided doubling), always computed from raw
/// magnitudes regardless of params.log_scale.
FrequencyProfile welch(std::span<const float> window, const StftParams& params,
                       Exec exec = Exec::kParallel);

/// In-place log scaling with the documented eps rule; no-op on an all-zero
/// spectrogram. Monotone per frame, so per-frame argmax is unchanged.
void log_scale_inplace(Spectrogram& s);

/// In-place min-max normalization to [0, 1]; constant input maps to zeros.
/// This is the fixed rule applied before classification and explanation.
void normalize_unit_inplace(Spectrogram& s);

namespace ref {
/// Direct DFT per frame (O(n^2), double accumulation). Reference
/// implementation used as the oracle for the FFT-backed path and in the
/// kernel benchmark.
Spectrogram stft(std::span<const float> window, const StftParams& params,
                 double sample_rate);
}  // namespace ref

// Grid/profile container ("SPC1"): magic, u32 version, u32 rows, u32 cols,
// u32 class_id, u8 log_scaled, u8 kind, then f32 little-endian row-major
// values. 1-D profiles use rows = 1 and their ProfileKind.
void save_grid(const std::filesystem::path& path, const Spectrogram& s,
               GridKind kind = GridKind::kSpectrogram);
Spectrogram load_grid(const std::filesystem::path& path, GridKind* kind_out = nullptr);
void save_profile(const std::filesystem::path& path, const FrequencyProfile& p);
FrequencyProfile load_profile(const std::filesystem::path& path);

/// CSV export, header "bin,freq_hz,value" (plus "value_std" when std_dev
/// is given; bin counts must match).
void write_profile_csv(const std::filesystem::path& path, const FrequencyProfile& p,
                       double bin_hz, const FrequencyProfile* std_dev = nullptr);

}  // namespace spx
