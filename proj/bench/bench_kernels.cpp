// SPDX-License-Identifier: Apache-2.0
//
// Timing harness comparing the serial reference implementations against
// the OpenMP production kernels on representative pipeline workloads.
// Usage: bench_kernels [repeats]

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "spx/cnn.hpp"
#include "spx/lime.hpp"
#include "spx/nn_kernels.hpp"
#include "spx/pipeline.hpp"
#include "spx/quickshift.hpp"
#include "spx/stft.hpp"

using namespace spx;

namespace {

double time_median(const std::function<void()>& fn, int repeats) {
  std::vector<double> times;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    times.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

void row(const char* name, double serial_ms, double omp_ms) {
  std::printf("%-34s %10.2f %10.2f %8.2fx\n", name, serial_ms, omp_ms,
              omp_ms > 0 ? serial_ms / omp_ms : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads: %d, repeats: %d\n", omp_get_max_threads(), repeats);
  std::printf("%-34s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  const auto manifest = default_manifest();
  const auto data = build_dataset(manifest);
  const StftParams stft_params;
  const auto& signal = data.signals[0];
  const std::span<const float> window(signal.data(), kDefaultWindowSamples);

  row("stft 200k -> 224x224 (fft)",
      time_median([&] { stft(window, stft_params, manifest.sample_rate, Exec::kSerial); }, repeats),
      time_median([&] { stft(window, stft_params, manifest.sample_rate, Exec::kParallel); }, repeats));

  {
    // Direct-DFT reference, one run (O(n^2) per frame).
    const auto t0 = std::chrono::steady_clock::now();
    ref::stft(window, stft_params, manifest.sample_rate);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-34s %10.2f %10s\n", "stft reference (direct DFT)", ms, "-");
  }

  row("welch 200k window",
      time_median([&] { welch(window, stft_params, Exec::kSerial); }, repeats),
      time_median([&] { welch(window, stft_params, Exec::kParallel); }, repeats));

  const Spectrogram golden = golden_canvas(data, 0, stft_params, Exec::kParallel);
  QuickshiftParams qs;
  row("quickshift 224x224",
      time_median([&] { quickshift(golden, qs, Exec::kSerial); }, repeats),
      time_median([&] { quickshift(golden, qs, Exec::kParallel); }, repeats));
  {
    Spectrogram crop;
    crop.rows = crop.cols = 64;
    crop.values.resize(64 * 64);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) crop.values[static_cast<size_t>(r) * 64 + c] = golden.at(r, c);
    const auto t0 = std::chrono::steady_clock::now();
    ref::quickshift(crop, qs);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-34s %10.2f %10s\n", "quickshift reference (64x64 crop)", ms, "-");
  }

  // CNN kernels on a training-sized batch.
  const CnnConfig cfg;
  const int N = 16;
  SmallCnnT<float> net(cfg, 123);
  std::vector<float> batch(static_cast<size_t>(N) * cfg.rows * cfg.cols);
  Rng rng(7);
  for (auto& v : batch) v = static_cast<float>(rng.uniform());
  std::vector<int> labels(static_cast<size_t>(N));
  for (auto& l : labels) l = static_cast<int>(rng.below(9));
  auto grads = CnnParams<float>::zeros(cfg);
  std::vector<float> probs(static_cast<size_t>(N) * cfg.n_classes);

  row("cnn loss+grad batch16",
      time_median([&] { net.loss_and_grad(batch.data(), labels.data(), N, grads, probs.data(), Exec::kSerial); }, repeats),
      time_median([&] { net.loss_and_grad(batch.data(), labels.data(), N, grads, probs.data(), Exec::kParallel); }, repeats));
  row("cnn predict batch16",
      time_median([&] { net.predict(batch.data(), N, probs.data(), Exec::kSerial); }, repeats),
      time_median([&] { net.predict(batch.data(), N, probs.data(), Exec::kParallel); }, repeats));

  // Individual conv layers, forward and backward.
  {
    const int C = cfg.c1, OC = cfg.c2, H = 112, W = 112;
    std::vector<float> in(static_cast<size_t>(N) * C * H * W), w(static_cast<size_t>(OC) * C * 9),
        b(static_cast<size_t>(OC)), out(static_cast<size_t>(N) * OC * 56 * 56), gin(in.size()),
        gw(w.size()), gb(static_cast<size_t>(OC));
    for (auto& v : in) v = static_cast<float>(rng.uniform());
    for (auto& v : w) v = static_cast<float>(rng.uniform() - 0.5);
    row("conv2 fwd 16x4x112x112",
        time_median([&] { conv3x3s2_forward(in.data(), N, C, H, W, w.data(), b.data(), OC, out.data(), Exec::kSerial); }, repeats),
        time_median([&] { conv3x3s2_forward(in.data(), N, C, H, W, w.data(), b.data(), OC, out.data(), Exec::kParallel); }, repeats));
    row("conv2 bwd-data",
        time_median([&] { conv3x3s2_backward_data(out.data(), N, OC, w.data(), C, H, W, gin.data(), Exec::kSerial); }, repeats),
        time_median([&] { conv3x3s2_backward_data(out.data(), N, OC, w.data(), C, H, W, gin.data(), Exec::kParallel); }, repeats));
    row("conv2 bwd-weights",
        time_median([&] { conv3x3s2_backward_weights(in.data(), N, C, H, W, out.data(), OC, gw.data(), gb.data(), Exec::kSerial); }, repeats),
        time_median([&] { conv3x3s2_backward_weights(in.data(), N, C, H, W, out.data(), OC, gw.data(), gb.data(), Exec::kParallel); }, repeats));
  }

  // One full LIME explanation (untrained weights are fine for timing).
  {
    LimeParams lime_params;
    lime_params.n_samples = 256;
    const SuperpixelMap segmap = quickshift(golden, qs, Exec::kParallel);
    std::printf("golden segments: %d\n", segmap.n_segments);
    SmallCnn model(cfg, 99);
    row("lime explain (256 samples)",
        time_median([&] {
          model.exec = Exec::kSerial;
          explain(golden, segmap, model, 0, lime_params, Rng(5), ExplanationMode::kSupporting,
                  Exec::kSerial);
        }, 3),
        time_median([&] {
          model.exec = Exec::kParallel;
          explain(golden, segmap, model, 0, lime_params, Rng(5), ExplanationMode::kSupporting,
                  Exec::kParallel);
        }, 3));
  }
  return 0;
}
