// SPDX-License-Identifier: Apache-2.0
#include "spx/stft.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "spx/rng.hpp"
#include "spx/synth.hpp"

using namespace spx;

namespace {

std::vector<float> noise_window(uint64_t seed, double sigma = 1.0) {
  Rng rng(seed);
  std::vector<float> w(kDefaultWindowSamples);
  for (auto& v : w) v = static_cast<float>(sigma * rng.normal());
  return w;
}

std::vector<float> tone_window(double freq_hz) {
  DeviceSpec d;
  d.class_id = 0;
  d.tones.push_back({freq_hz, 1.0, 0.0});
  return synthesize_signal(d, kDefaultWindowSamples, 2e6, 31);
}

int column_argmax(const Spectrogram& s, int col) {
  int best = 0;
  for (int r = 1; r < s.rows; ++r)
    if (s.at(r, col) > s.at(best, col)) best = r;
  return best;
}

}  // namespace

TEST_CASE("reference parameterization maps 200k samples onto 224x224") {
  const StftParams p;
  CHECK(p.n_bins() == 224);
  CHECK(p.n_frames(kDefaultWindowSamples) == 224);
  const auto s = stft(noise_window(1), p, 2e6);
  CHECK(s.rows == 224);
  CHECK(s.cols == 224);
  CHECK(s.freq_axis.front() == 0.0);
  CHECK(s.freq_axis.back() == doctest::Approx(1e6));
  CHECK(std::is_sorted(s.time_axis.begin(), s.time_axis.end()));
}

TEST_CASE("invalid parameterizations and window lengths are rejected") {
  StftParams p;
  p.n_fft = 512;  // 257 bins
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = StftParams{};
  p.hop = 800;  // 250 frames from 200k samples
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = StftParams{};
  const std::vector<float> short_window(1000, 0.0f);
  CHECK_THROWS_AS(stft(short_window, p, 2e6), std::invalid_argument);
}

TEST_CASE("all-zero window gives an all-zero spectrogram and welch profile") {
  const std::vector<float> zeros(kDefaultWindowSamples, 0.0f);
  StftParams p;
  p.log_scale = false;
  const auto s = stft(zeros, p, 2e6);
  CHECK(std::all_of(s.values.begin(), s.values.end(), [](float v) { return v == 0.0f; }));
  p.log_scale = true;  // documented: all-zero input stays all-zero
  const auto sl = stft(zeros, p, 2e6);
  CHECK(std::all_of(sl.values.begin(), sl.values.end(), [](float v) { return v == 0.0f; }));
  const auto w = welch(zeros, p);
  CHECK(std::all_of(w.values.begin(), w.values.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("pure 100 kHz tone puts every frame's argmax at bin 22") {
  StftParams p;
  p.log_scale = false;
  const auto s = stft(tone_window(100'000.0), p, 2e6);
  CHECK(p.bin_of(100'000.0, 2e6) == 22);  // round(100000 / (2e6 / 446))
  for (int c = 0; c < s.cols; ++c) CHECK(column_argmax(s, c) == 22);

  const auto w = welch(tone_window(100'000.0), p);
  int wbest = 0;
  for (int k = 1; k < w.bins(); ++k)
    if (w.values[static_cast<size_t>(k)] > w.values[static_cast<size_t>(wbest)]) wbest = k;
  CHECK(wbest == 22);
}

TEST_CASE("fft path matches the direct-DFT reference") {
  StftParams p;
  p.log_scale = false;
  const auto w = noise_window(2);
  const auto fast = stft(w, p, 2e6);
  const auto slow = ref::stft(w, p, 2e6);
  float maxv = 0.0f;
  for (float v : slow.values) maxv = std::max(maxv, v);
  double worst = 0.0;
  for (size_t i = 0; i < fast.values.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(fast.values[i]) - slow.values[i]));
  CHECK(worst <= 1e-4 * maxv);
}

TEST_CASE("serial and parallel stft are bit-identical") {
  omp_set_num_threads(3);  // oversubscribe to exercise scheduling
  const auto w = noise_window(3);
  const StftParams p;
  const auto a = stft(w, p, 2e6, Exec::kSerial);
  const auto b = stft(w, p, 2e6, Exec::kParallel);
  CHECK(a.values == b.values);
  omp_set_num_threads(1);
}

TEST_CASE("welch equals the column mean of squared raw magnitudes") {
  StftParams p;
  p.log_scale = false;
  const auto w = noise_window(4, 0.5);
  const auto s = stft(w, p, 2e6);
  const auto prof = welch(w, p);
  for (int k = 0; k < s.rows; ++k) {
    double acc = 0.0;
    for (int f = 0; f < s.cols; ++f) {
      const double m = s.at(k, f);
      acc += m * m;
    }
    acc /= s.cols;
    CHECK(std::abs(prof.values[static_cast<size_t>(k)] - acc) <=
          1e-6 * std::max(1.0, acc));
  }
}

TEST_CASE("welch power is quadratic in amplitude") {
  StftParams p;
  auto w = noise_window(5, 0.3);
  const auto base = welch(w, p);
  for (auto& v : w) v *= 2.0f;
  const auto doubled = welch(w, p);
  for (int k = 0; k < base.bins(); ++k) {
    const double expect = 4.0 * base.values[static_cast<size_t>(k)];
    CHECK(std::abs(doubled.values[static_cast<size_t>(k)] - expect) <=
          1e-6 * std::max(1e-12, expect));
  }
}

TEST_CASE("welch sum matches the per-frame window-gain identity") {
  // sum_k welch[k] = mean over frames of
  //   (n_fft * sum_n w^2 x^2 + |DC|^2 + |Nyquist|^2) / 2,
  // the one-sided Parseval identity for each tapered frame.
  const StftParams p;
  const auto w = noise_window(6, 1.0);
  const auto prof = welch(w, p);
  double lhs = 0.0;
  for (double v : prof.values) lhs += v;

  const int n = p.n_fft;
  std::vector<double> taper(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j)
    taper[static_cast<size_t>(j)] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * j / n));
  double rhs = 0.0;
  const int frames = p.n_frames(static_cast<int64_t>(w.size()));
  for (int f = 0; f < frames; ++f) {
    const float* src = w.data() + static_cast<int64_t>(f) * p.hop;
    double energy = 0.0, dc = 0.0, nyq = 0.0;
    for (int j = 0; j < n; ++j) {
      const double y = taper[static_cast<size_t>(j)] * src[j];
      energy += y * y;
      dc += y;
      nyq += (j % 2 == 0) ? y : -y;
    }
    rhs += (n * energy + dc * dc + nyq * nyq) / 2.0;
  }
  rhs /= frames;
  CHECK(std::abs(lhs - rhs) <= 1e-3 * rhs);
}

TEST_CASE("log scaling preserves per-frame argmax") {
  StftParams raw;
  raw.log_scale = false;
  StftParams logp;
  logp.log_scale = true;
  for (uint64_t seed : {7ull, 8ull, 9ull}) {
    const auto w = noise_window(seed, 0.2);
    const auto a = stft(w, raw, 2e6);
    const auto b = stft(w, logp, 2e6);
    CHECK(b.log_scaled);
    for (int c = 0; c < a.cols; ++c) CHECK(column_argmax(a, c) == column_argmax(b, c));
  }
}

TEST_CASE("unit normalization maps to [0,1] and zeroes constant grids") {
  Spectrogram s;
  s.rows = 2;
  s.cols = 2;
  s.values = {2.0f, 4.0f, 6.0f, 10.0f};
  normalize_unit_inplace(s);
  CHECK(s.values == std::vector<float>{0.0f, 0.25f, 0.5f, 1.0f});
  s.values = {3.0f, 3.0f, 3.0f, 3.0f};
  normalize_unit_inplace(s);
  CHECK(s.values == std::vector<float>{0.0f, 0.0f, 0.0f, 0.0f});
}
