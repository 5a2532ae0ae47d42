// SPDX-License-Identifier: Apache-2.0
#include "spx/stft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "spx/io.hpp"

namespace spx {

void StftParams::validate() const {
  if (n_fft < 2 || hop < 1) throw std::invalid_argument("stft: n_fft/hop must be positive");
  if (n_bins() != kGridSize)
    throw std::invalid_argument("stft: n_fft/2 + 1 must equal " + std::to_string(kGridSize) +
                                " (got n_fft=" + std::to_string(n_fft) + ")");
  if (n_frames(kDefaultWindowSamples) != kGridSize)
    throw std::invalid_argument("stft: hop=" + std::to_string(hop) + " does not map a " +
                                std::to_string(kDefaultWindowSamples) + "-sample window onto " +
                                std::to_string(kGridSize) + " frames");
}

int StftParams::n_frames(int64_t window_len) const {
  if (window_len < n_fft) return 0;
  return static_cast<int>((window_len - n_fft) / hop) + 1;
}

int StftParams::bin_of(double freq_hz, double sample_rate) const {
  return static_cast<int>(std::llround(freq_hz / bin_hz(sample_rate)));
}

namespace {

std::vector<float> hann_window(int n) {
  std::vector<float> w(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j)
    w[static_cast<size_t>(j)] = static_cast<float>(
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * j / n)));
  return w;
}

// FFTW plans are not thread-safe to create; execution on distinct buffers
// is. Plans are cached per transform size for the process lifetime.
fftwf_plan get_plan(int n) {
  static std::mutex mu;
  static std::map<int, fftwf_plan> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  float* in = fftwf_alloc_real(static_cast<size_t>(n));
  fftwf_complex* out = fftwf_alloc_complex(static_cast<size_t>(n / 2 + 1));
  fftwf_plan p = fftwf_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftwf_free(in);
  fftwf_free(out);
  if (!p) throw std::runtime_error("fftw plan creation failed");
  cache.emplace(n, p);
  return p;
}

void check_window_shape(std::span<const float> window, const StftParams& params) {
  params.validate();
  const int frames = params.n_frames(static_cast<int64_t>(window.size()));
  if (frames != kGridSize)
    throw std::invalid_argument("stft: window length " + std::to_string(window.size()) +
                                " yields " + std::to_string(frames) + " frames, expected " +
                                std::to_string(kGridSize));
  const int64_t last_end =
      static_cast<int64_t>(frames - 1) * params.hop + params.n_fft;
  if (last_end > static_cast<int64_t>(window.size()))
    throw std::invalid_argument("stft: last frame exceeds window length");
}

void fill_axes(Spectrogram& s, const StftParams& params, double sample_rate) {
  s.freq_axis.resize(static_cast<size_t>(s.rows));
  for (int k = 0; k < s.rows; ++k)
    s.freq_axis[static_cast<size_t>(k)] = k * params.bin_hz(sample_rate);
  s.time_axis.resize(static_cast<size_t>(s.cols));
  for (int f = 0; f < s.cols; ++f)
    s.time_axis[static_cast<size_t>(f)] =
        (static_cast<double>(f) * params.hop + (params.n_fft - 1) / 2.0) / sample_rate;
}

}  // namespace

Spectrogram stft(std::span<const float> window, const StftParams& params,
                 double sample_rate, Exec exec) {
  check_window_shape(window, params);
  const int n = params.n_fft;
  const int bins = params.n_bins();
  const int frames = params.n_frames(static_cast<int64_t>(window.size()));
  const std::vector<float> taper = hann_window(n);
  const fftwf_plan plan = get_plan(n);

  Spectrogram s;
  s.rows = bins;
  s.cols = frames;
  s.values.assign(static_cast<size_t>(bins) * frames, 0.0f);

#pragma omp parallel if (exec == Exec::kParallel)
  {
    std::vector<float> in(static_cast<size_t>(n));
    std::vector<std::complex<float>> out(static_cast<size_t>(bins));
#pragma omp for schedule(static)
    for (int f = 0; f < frames; ++f) {
      const float* src = window.data() + static_cast<int64_t>(f) * params.hop;
      for (int j = 0; j < n; ++j) in[static_cast<size_t>(j)] = taper[static_cast<size_t>(j)] * src[j];
      fftwf_execute_dft_r2c(plan, in.data(),
                            reinterpret_cast<fftwf_complex*>(out.data()));
      for (int k = 0; k < bins; ++k) {
        const double re = out[static_cast<size_t>(k)].real();
        const double im = out[static_cast<size_t>(k)].imag();
        s.values[static_cast<size_t>(k) * frames + f] =
            static_cast<float>(std::sqrt(re * re + im * im));
      }
    }
  }

  fill_axes(s, params, sample_rate);
  if (params.log_scale) log_scale_inplace(s);
  return s;
}

FrequencyProfile welch(std::span<const float> window, const StftParams& params,
                       Exec exec) {
  StftParams raw = params;
  raw.log_scale = false;
  const Spectrogram s = stft(window, raw, 1.0, exec);
  FrequencyProfile p;
  p.kind = ProfileKind::kWelch;
  p.values.assign(static_cast<size_t>(s.rows), 0.0);
  for (int k = 0; k < s.rows; ++k) {
    double acc = 0.0;
    for (int f = 0; f < s.cols; ++f) {
      const double m = s.at(k, f);
      acc += m * m;
    }
    p.values[static_cast<size_t>(k)] = acc / s.cols;
  }
  return p;
}

void log_scale_inplace(Spectrogram& s) {
  const float maxv = s.values.empty()
                         ? 0.0f
                         : *std::max_element(s.values.begin(), s.values.end());
  if (!(maxv > 0.0f)) {
    s.log_scaled = true;  // all-zero spectrogram stays all-zero
    return;
  }
  const double eps = 1e-10 * static_cast<double>(maxv);
  for (auto& v : s.values) v = static_cast<float>(std::log(static_cast<double>(v) + eps));
  s.log_scaled = true;
}

void normalize_unit_inplace(Spectrogram& s) {
  if (s.values.empty()) return;
  const auto [mn, mx] = std::minmax_element(s.values.begin(), s.values.end());
  const float lo = *mn, hi = *mx;
  if (!(hi > lo)) {
    std::fill(s.values.begin(), s.values.end(), 0.0f);
    return;
  }
  const float inv = 1.0f / (hi - lo);
  for (auto& v : s.values) v = (v - lo) * inv;
}

namespace ref {

Spectrogram stft(std::span<const float> window, const StftParams& params,
                 double sample_rate) {
  check_window_shape(window, params);
  const int n = params.n_fft;
  const int bins = params.n_bins();
  const int frames = params.n_frames(static_cast<int64_t>(window.size()));

  std::vector<double> taper(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j)
    taper[static_cast<size_t>(j)] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * j / n));

  Spectrogram s;
  s.rows = bins;
  s.cols = frames;
  s.values.assign(static_cast<size_t>(bins) * frames, 0.0f);
  for (int f = 0; f < frames; ++f) {
    const float* src = window.data() + static_cast<int64_t>(f) * params.hop;
    for (int k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      for (int j = 0; j < n; ++j) {
        const double x = taper[static_cast<size_t>(j)] * src[j];
        const double ang = 2.0 * std::numbers::pi * k * j / n;
        re += x * std::cos(ang);
        im -= x * std::sin(ang);
      }
      s.values[static_cast<size_t>(k) * frames + f] =
          static_cast<float>(std::sqrt(re * re + im * im));
    }
  }
  fill_axes(s, params, sample_rate);
  if (params.log_scale) log_scale_inplace(s);
  return s;
}

}  // namespace ref

// ---- SPC1 container ----

namespace {
void save_grid_raw(const std::filesystem::path& path, int rows, int cols,
                   uint32_t class_id, bool log_scaled, uint8_t kind,
                   std::span<const float> values) {
  BinaryWriter w(path);
  w.magic("SPC1");
  w.u32(1);
  w.u32(static_cast<uint32_t>(rows));
  w.u32(static_cast<uint32_t>(cols));
  w.u32(class_id);
  w.u8(log_scaled ? 1 : 0);
  w.u8(kind);
  w.f32_array(values);
  w.close();
}
}  // namespace

void save_grid(const std::filesystem::path& path, const Spectrogram& s, GridKind kind) {
  save_grid_raw(path, s.rows, s.cols, s.class_id, s.log_scaled,
                static_cast<uint8_t>(kind), s.values);
}

Spectrogram load_grid(const std::filesystem::path& path, GridKind* kind_out) {
  BinaryReader r(path);
  r.expect_magic("SPC1");
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported SPC1 version " + std::to_string(version));
  Spectrogram s;
  s.rows = static_cast<int>(r.u32());
  s.cols = static_cast<int>(r.u32());
  s.class_id = r.u32();
  s.log_scaled = r.u8() != 0;
  const uint8_t kind = r.u8();
  if (kind_out) *kind_out = static_cast<GridKind>(kind);
  s.values.resize(static_cast<size_t>(s.rows) * s.cols);
  r.f32_array(s.values);
  return s;
}

void save_profile(const std::filesystem::path& path, const FrequencyProfile& p) {
  std::vector<float> vals(p.values.begin(), p.values.end());
  save_grid_raw(path, 1, p.bins(), kNoClass, false, static_cast<uint8_t>(p.kind), vals);
}

FrequencyProfile load_profile(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("SPC1");
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported SPC1 version " + std::to_string(version));
  const uint32_t rows = r.u32();
  const uint32_t cols = r.u32();
  r.u32();  // class_id, unused for profiles
  r.u8();   // log_scaled
  const uint8_t kind = r.u8();
  if (rows != 1) throw std::runtime_error("profile file must have rows == 1");
  FrequencyProfile p;
  p.kind = static_cast<ProfileKind>(kind);
  std::vector<float> vals(cols);
  r.f32_array(vals);
  p.values.assign(vals.begin(), vals.end());
  return p;
}

void write_profile_csv(const std::filesystem::path& path, const FrequencyProfile& p,
                       double bin_hz, const FrequencyProfile* std_dev) {
  if (std_dev && std_dev->bins() != p.bins())
    throw std::invalid_argument("csv: mean/std bin counts differ");
  std::string out = std_dev ? "bin,freq_hz,value,value_std\n" : "bin,freq_hz,value\n";
  char line[128];
  for (int i = 0; i < p.bins(); ++i) {
    if (std_dev) {
      std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", i, i * bin_hz,
                    p.values[static_cast<size_t>(i)], std_dev->values[static_cast<size_t>(i)]);
    } else {
      std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", i, i * bin_hz,
                    p.values[static_cast<size_t>(i)]);
    }
    out += line;
  }
  write_text_file(path, out);
}

}  // namespace spx
