// SPDX-License-Identifier: Apache-2.0
#include "spx/lime.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "spx/io.hpp"

namespace spx {

void LimeParams::validate() const {
  if (n_samples < 2) throw std::invalid_argument("lime: n_samples must be >= 2");
  if (!(kernel_width > 0.0)) throw std::invalid_argument("lime: kernel_width must be > 0");
  if (ridge_lambda < 0.0) throw std::invalid_argument("lime: ridge_lambda must be >= 0");
  if (top_n < 1) throw std::invalid_argument("lime: top_n must be >= 1");
}

std::vector<float> segment_means(const Spectrogram& canvas, const SuperpixelMap& segmap) {
  if (canvas.rows != segmap.rows || canvas.cols != segmap.cols)
    throw std::invalid_argument("lime: canvas/segment grid shapes differ");
  std::vector<double> sum(static_cast<size_t>(segmap.n_segments), 0.0);
  std::vector<int64_t> cnt(static_cast<size_t>(segmap.n_segments), 0);
  for (size_t i = 0; i < canvas.values.size(); ++i) {
    const uint32_t s = segmap.labels[i];
    sum[s] += canvas.values[i];
    ++cnt[s];
  }
  std::vector<float> fill(static_cast<size_t>(segmap.n_segments));
  for (size_t s = 0; s < fill.size(); ++s)
    fill[s] = cnt[s] ? static_cast<float>(sum[s] / cnt[s]) : 0.0f;
  return fill;
}

namespace {

void perturb_into(const Spectrogram& canvas, const SuperpixelMap& segmap,
                  const uint8_t* mask_bits, std::span<const float> fills, float* out) {
  const float* src = canvas.values.data();
  const uint32_t* lab = segmap.labels.data();
  const size_t n = canvas.values.size();
  for (size_t i = 0; i < n; ++i) {
    const uint32_t s = lab[i];
    out[i] = mask_bits[s] ? src[i] : fills[s];
  }
}

}  // namespace

Spectrogram perturb(const Spectrogram& canvas, const SuperpixelMap& segmap,
                    std::span<const uint8_t> mask_bits) {
  if (static_cast<int>(mask_bits.size()) != segmap.n_segments)
    throw std::invalid_argument("lime: mask length " + std::to_string(mask_bits.size()) +
                                " != n_segments " + std::to_string(segmap.n_segments));
  const auto fills = segment_means(canvas, segmap);
  Spectrogram out = canvas;
  perturb_into(canvas, segmap, mask_bits.data(), fills, out.values.data());
  return out;
}

std::vector<double> weighted_ridge(const std::vector<uint8_t>& bits, int n_rows,
                                   int n_features, std::span<const double> y,
                                   std::span<const double> weights, double lambda,
                                   double* r2_out) {
  const int p = n_features + 1;  // intercept column of ones first
  std::vector<double> a(static_cast<size_t>(p) * p, 0.0);  // X'WX, upper triangle
  std::vector<double> g(static_cast<size_t>(p), 0.0);      // X'Wy

  // Row i contributes w_i * x x' with x = [1, bits_i]. Only set bits matter.
  std::vector<int> on;
  on.reserve(static_cast<size_t>(n_features));
  for (int i = 0; i < n_rows; ++i) {
    const uint8_t* row = bits.data() + static_cast<size_t>(i) * n_features;
    const double w = weights[static_cast<size_t>(i)];
    const double wy = w * y[static_cast<size_t>(i)];
    on.clear();
    for (int j = 0; j < n_features; ++j)
      if (row[j]) on.push_back(j + 1);
    a[0] += w;
    g[0] += wy;
    for (size_t u = 0; u < on.size(); ++u) {
      const int ju = on[u];
      a[static_cast<size_t>(ju)] += w;  // row 0, column ju
      g[static_cast<size_t>(ju)] += wy;
      double* arow = a.data() + static_cast<size_t>(ju) * p;
      for (size_t t = u; t < on.size(); ++t) arow[on[t]] += w;
    }
  }
  for (int j = 1; j < p; ++j) a[static_cast<size_t>(j) * p + j] += lambda;

  // Cholesky A = L L' on the upper triangle (A symmetric positive
  // definite for lambda > 0 since X'WX[0][0] = sum of weights > 0).
  std::vector<double> l(static_cast<size_t>(p) * p, 0.0);
  for (int j = 0; j < p; ++j) {
    for (int i = j; i < p; ++i) {
      double s = a[static_cast<size_t>(j) * p + i];  // A(i,j), upper storage
      for (int k = 0; k < j; ++k)
        s -= l[static_cast<size_t>(i) * p + k] * l[static_cast<size_t>(j) * p + k];
      if (i == j) {
        if (!(s > 0.0))
          throw std::runtime_error("lime: ridge system not positive definite "
                                   "(singular design with lambda = 0?)");
        l[static_cast<size_t>(i) * p + j] = std::sqrt(s);
      } else {
        l[static_cast<size_t>(i) * p + j] = s / l[static_cast<size_t>(j) * p + j];
      }
    }
  }
  // Solve L z = g, then L' beta = z.
  std::vector<double> beta(static_cast<size_t>(p));
  for (int i = 0; i < p; ++i) {
    double s = g[static_cast<size_t>(i)];
    for (int k = 0; k < i; ++k) s -= l[static_cast<size_t>(i) * p + k] * beta[static_cast<size_t>(k)];
    beta[static_cast<size_t>(i)] = s / l[static_cast<size_t>(i) * p + i];
  }
  for (int i = p - 1; i >= 0; --i) {
    double s = beta[static_cast<size_t>(i)];
    for (int k = i + 1; k < p; ++k)
      s -= l[static_cast<size_t>(k) * p + i] * beta[static_cast<size_t>(k)];
    beta[static_cast<size_t>(i)] = s / l[static_cast<size_t>(i) * p + i];
  }

  if (r2_out) {
    double wsum = 0.0, wy = 0.0;
    for (int i = 0; i < n_rows; ++i) {
      wsum += weights[static_cast<size_t>(i)];
      wy += weights[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
    }
    const double ymean = wy / wsum;
    double ss_res = 0.0, ss_tot = 0.0;
    for (int i = 0; i < n_rows; ++i) {
      const uint8_t* row = bits.data() + static_cast<size_t>(i) * n_features;
      double pred = beta[0];
      for (int j = 0; j < n_features; ++j)
        if (row[j]) pred += beta[static_cast<size_t>(j) + 1];
      const double r = y[static_cast<size_t>(i)] - pred;
      const double d = y[static_cast<size_t>(i)] - ymean;
      ss_res += weights[static_cast<size_t>(i)] * r * r;
      ss_tot += weights[static_cast<size_t>(i)] * d * d;
    }
    // A response that is constant up to rounding has no variance to
    // explain; report 0 instead of a noise-dominated ratio.
    const double floor = 1e-12 * wsum * std::max(1.0, ymean * ymean);
    *r2_out = ss_tot > floor ? 1.0 - ss_res / ss_tot : 0.0;
  }
  return beta;
}

Explanation explain(const Spectrogram& canvas, const SuperpixelMap& segmap,
                    const Classifier& classifier, int target_class,
                    const LimeParams& params, Rng rng, ExplanationMode mode,
                    Exec exec) {
  params.validate();
  if (mode != ExplanationMode::kSupporting)
    throw std::invalid_argument("lime: only the supporting-superpixels mode is implemented");
  if (target_class < 0 || target_class >= classifier.n_classes())
    throw std::invalid_argument("lime: target_class " + std::to_string(target_class) +
                                " out of range");
  if (canvas.rows != segmap.rows || canvas.cols != segmap.cols)
    throw std::invalid_argument("lime: canvas/segment grid shapes differ");

  const int S = segmap.n_segments;
  const int n = params.n_samples;
  const int K = classifier.n_classes();
  if (n < S)
    std::cerr << "warning: lime n_samples (" << n << ") below segment count (" << S
              << "); coefficients may be under-determined\n";

  // Mask matrix: row 0 all-ones, the rest fair coins, drawn row-major.
  std::vector<uint8_t> bits(static_cast<size_t>(n) * S);
  std::fill_n(bits.begin(), S, uint8_t{1});
  for (size_t i = static_cast<size_t>(S); i < bits.size(); ++i)
    bits[i] = static_cast<uint8_t>(rng.next() >> 63);

  const auto fills = segment_means(canvas, segmap);
  const int64_t hw = static_cast<int64_t>(canvas.rows) * canvas.cols;

  // Perturb + query in chunks; chunks are independent so the loop is
  // parallel across them.
  std::vector<double> y(static_cast<size_t>(n));
  const int chunk = 16;
  const int n_chunks = (n + chunk - 1) / chunk;
#pragma omp parallel if (exec == Exec::kParallel)
  {
    std::vector<float> buf(static_cast<size_t>(chunk) * hw);
    std::vector<float> probs(static_cast<size_t>(chunk) * K);
#pragma omp for schedule(static)
    for (int ci = 0; ci < n_chunks; ++ci) {
      const int at = ci * chunk;
      const int m = std::min(chunk, n - at);
      for (int i = 0; i < m; ++i)
        perturb_into(canvas, segmap, bits.data() + static_cast<size_t>(at + i) * S, fills,
                     buf.data() + static_cast<int64_t>(i) * hw);
      classifier.predict_proba(buf.data(), m, canvas.rows, canvas.cols, probs.data());
      for (int i = 0; i < m; ++i)
        y[static_cast<size_t>(at + i)] = probs[static_cast<int64_t>(i) * K + target_class];
    }
  }

  // Proximity weights from the hidden-segment fraction.
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int64_t off = 0;
    const uint8_t* row = bits.data() + static_cast<size_t>(i) * S;
    for (int j = 0; j < S; ++j) off += row[j] == 0;
    const double d = static_cast<double>(off) / S;
    w[static_cast<size_t>(i)] = std::exp(-(d * d) / (params.kernel_width * params.kernel_width));
  }

  Explanation e;
  e.rows = canvas.rows;
  e.cols = canvas.cols;
  e.target_class = target_class;
  e.mask.assign(static_cast<size_t>(canvas.rows) * canvas.cols, 0);

  const auto beta = weighted_ridge(bits, n, S, y, w, params.ridge_lambda, &e.local_r2);
  e.superpixel_weights.assign(beta.begin() + 1, beta.end());

  // Rank by descending coefficient; keep positive ones only.
  std::vector<int> order(static_cast<size_t>(S));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double wa = e.superpixel_weights[static_cast<size_t>(a)];
    const double wb = e.superpixel_weights[static_cast<size_t>(b)];
    return wa != wb ? wa > wb : a < b;
  });
  std::vector<uint8_t> chosen(static_cast<size_t>(S), 0);
  int picked = 0;
  for (int r = 0; r < S && picked < params.top_n; ++r) {
    if (e.superpixel_weights[static_cast<size_t>(order[static_cast<size_t>(r)])] <=
        kMinSupportCoefficient)
      break;
    chosen[static_cast<size_t>(order[static_cast<size_t>(r)])] = 1;
    ++picked;
  }
  e.truncated_positive = picked < params.top_n;
  for (size_t i = 0; i < e.mask.size(); ++i) e.mask[i] = chosen[segmap.labels[i]];
  return e;
}

// ---- EXP1 container ----
// Header: magic, u32 version, u32 rows, u32 cols, u32 target_class,
// u32 n_segments, u8 truncated flag; then the mask bit-packed per row
// (LSB-first within each byte, ceil(cols/8) bytes per row); then the
// f32 coefficient vector, one per segment.

void Explanation::save(const std::filesystem::path& path) const {
  BinaryWriter w(path);
  w.magic("EXP1");
  w.u32(1);
  w.u32(static_cast<uint32_t>(rows));
  w.u32(static_cast<uint32_t>(cols));
  w.u32(static_cast<uint32_t>(target_class));
  w.u32(static_cast<uint32_t>(superpixel_weights.size()));
  w.u8(truncated_positive ? 1 : 0);
  const int stride = (cols + 7) / 8;
  std::vector<uint8_t> packed(static_cast<size_t>(rows) * stride, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (mask[static_cast<size_t>(r) * cols + c])
        packed[static_cast<size_t>(r) * stride + c / 8] |= static_cast<uint8_t>(1u << (c % 8));
  w.bytes(packed);
  std::vector<float> coeffs(superpixel_weights.begin(), superpixel_weights.end());
  w.f32_array(coeffs);
  w.close();
}

Explanation Explanation::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("EXP1");
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported EXP1 version " + std::to_string(version));
  Explanation e;
  e.rows = static_cast<int>(r.u32());
  e.cols = static_cast<int>(r.u32());
  e.target_class = static_cast<int>(r.u32());
  const uint32_t n_seg = r.u32();
  e.truncated_positive = r.u8() != 0;
  const int stride = (e.cols + 7) / 8;
  std::vector<uint8_t> packed(static_cast<size_t>(e.rows) * stride);
  r.bytes(packed);
  e.mask.assign(static_cast<size_t>(e.rows) * e.cols, 0);
  for (int row = 0; row < e.rows; ++row)
    for (int c = 0; c < e.cols; ++c)
      e.mask[static_cast<size_t>(row) * e.cols + c] =
          (packed[static_cast<size_t>(row) * stride + c / 8] >> (c % 8)) & 1u;
  std::vector<float> coeffs(n_seg);
  r.f32_array(coeffs);
  e.superpixel_weights.assign(coeffs.begin(), coeffs.end());
  return e;
}

}  // namespace spx
