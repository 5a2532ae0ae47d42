// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent oracles used by the tests. These deliberately avoid the
// library's production code paths: the DFT is a direct Goertzel-style
// evaluation and the ridge solver is Gauss-Jordan elimination.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace spx::test {

/// |X_k| of the plain length-n DFT of `x` (no window), evaluated directly.
inline double dft_bin_magnitude(std::span<const float> x, int64_t k) {
  const auto n = static_cast<int64_t>(x.size());
  double re = 0.0, im = 0.0;
  for (int64_t j = 0; j < n; ++j) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) *
                       static_cast<double>(j) / static_cast<double>(n);
    re += x[static_cast<size_t>(j)] * std::cos(ang);
    im -= x[static_cast<size_t>(j)] * std::sin(ang);
  }
  return std::hypot(re, im);
}

/// Solves (X'WX + lambda * D) beta = X'Wy by Gauss-Jordan with partial
/// pivoting, D = diag(0, 1, ..., 1), X = [1 | bits]. Independent route for
/// checking the library's Cholesky-based weighted ridge.
inline std::vector<double> ridge_gauss_jordan(const std::vector<uint8_t>& bits,
                                              int n_rows, int n_features,
                                              std::span<const double> y,
                                              std::span<const double> w,
                                              double lambda) {
  const int p = n_features + 1;
  std::vector<double> a(static_cast<size_t>(p) * (p + 1), 0.0);
  auto at = [&](int r, int c) -> double& { return a[static_cast<size_t>(r) * (p + 1) + c]; };
  for (int i = 0; i < n_rows; ++i) {
    std::vector<double> x(static_cast<size_t>(p), 0.0);
    x[0] = 1.0;
    for (int j = 0; j < n_features; ++j)
      x[static_cast<size_t>(j) + 1] = bits[static_cast<size_t>(i) * n_features + j];
    for (int r = 0; r < p; ++r) {
      for (int c = 0; c < p; ++c) at(r, c) += w[static_cast<size_t>(i)] * x[static_cast<size_t>(r)] * x[static_cast<size_t>(c)];
      at(r, p) += w[static_cast<size_t>(i)] * x[static_cast<size_t>(r)] * y[static_cast<size_t>(i)];
    }
  }
  for (int r = 1; r < p; ++r) at(r, r) += lambda;

  for (int col = 0; col < p; ++col) {
    int pivot = col;
    for (int r = col + 1; r < p; ++r)
      if (std::abs(at(r, col)) > std::abs(at(pivot, col))) pivot = r;
    if (std::abs(at(pivot, col)) < 1e-14)
      throw std::runtime_error("oracle: singular system");
    if (pivot != col)
      for (int c = 0; c <= p; ++c) std::swap(at(pivot, c), at(col, c));
    const double inv = 1.0 / at(col, col);
    for (int c = 0; c <= p; ++c) at(col, c) *= inv;
    for (int r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = at(r, col);
      if (f == 0.0) continue;
      for (int c = 0; c <= p; ++c) at(r, c) -= f * at(col, c);
    }
  }
  std::vector<double> beta(static_cast<size_t>(p));
  for (int r = 0; r < p; ++r) beta[static_cast<size_t>(r)] = at(r, p);
  return beta;
}

}  // namespace spx::test
