// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense kernels for the reference CNN. Every parallel variant assigns each
// output element to exactly one thread and accumulates it in the same
// order as the serial reference (spx::ref), so outputs are bit-identical
// across Exec modes and thread counts. That property is what makes seeded
// training reproducible while still using all cores.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "spx/exec.hpp"

namespace spx {

// 3x3 convolution, stride 2, padding 1.
// in: [N, C, H, W], weight: [OC, C, 3, 3], bias: [OC], out: [N, OC, HO, WO]
// with HO = (H - 1) / 2 + 1, WO = (W - 1) / 2 + 1.
inline int conv_out_dim(int d) { return (d - 1) / 2 + 1; }

// The stride-2 kernels split each input row into its even- and odd-phase
// samples once, which turns every inner loop into a unit-stride
// multiply-accumulate the compiler can vectorize. Loads move to the
// scratch copy but the per-output-element accumulation sequence
// (ic, ky, kx) is untouched, so results stay bit-identical to the direct
// reference kernels.
//
// Scratch layout: [C][H][2][Wh] with Wh = (W + 2) / 2; phase 0 holds
// in[2j], phase 1 holds in[2j + 1].
template <typename T>
void deinterleave_rows(const T* in, int C, int H, int W, T* scratch) {
  const int wh = (W + 2) / 2;
  for (int ic = 0; ic < C; ++ic) {
    for (int iy = 0; iy < H; ++iy) {
      const T* row = in + (static_cast<int64_t>(ic) * H + iy) * W;
      T* even = scratch + ((static_cast<int64_t>(ic) * H + iy) * 2 + 0) * wh;
      T* odd = even + wh;
      const int ne = (W + 1) / 2, no = W / 2;
      for (int j = 0; j < ne; ++j) even[j] = row[2 * j];
      for (int j = 0; j < no; ++j) odd[j] = row[2 * j + 1];
    }
  }
}

template <typename T>
void conv3x3s2_forward(const T* in, int N, int C, int H, int W, const T* weight,
                       const T* bias, int OC, T* out, Exec exec) {
  const int HO = conv_out_dim(H), WO = conv_out_dim(W);
  const int64_t in_chw = static_cast<int64_t>(C) * H * W;
  const int64_t out_chw = static_cast<int64_t>(OC) * HO * WO;
  const int wh = (W + 2) / 2;
  const int hi1 = std::min(WO - 1, (W - 1) / 2);  // kx = 1 bound
  const int hi2 = std::min(WO - 1, (W - 2) / 2);  // kx = 2 bound
#pragma omp parallel if (exec == Exec::kParallel)
  {
    std::vector<T> scratch(static_cast<size_t>(C) * H * 2 * wh);
    std::vector<T> acc(static_cast<size_t>(WO));
#pragma omp for schedule(static)
    for (int n = 0; n < N; ++n) {
      deinterleave_rows(in + n * in_chw, C, H, W, scratch.data());
      for (int oc = 0; oc < OC; ++oc) {
        for (int oy = 0; oy < HO; ++oy) {
          for (int ox = 0; ox < WO; ++ox) acc[static_cast<size_t>(ox)] = bias[oc];
          for (int ic = 0; ic < C; ++ic) {
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = oy * 2 + ky - 1;
              if (iy < 0 || iy >= H) continue;
              const T* even = scratch.data() + ((static_cast<int64_t>(ic) * H + iy) * 2) * wh;
              const T* odd = even + wh;
              const T* wk = weight + ((static_cast<int64_t>(oc) * C + ic) * 3 + ky) * 3;
              const T w0 = wk[0], w1 = wk[1], w2 = wk[2];
              T* a = acc.data();
              for (int ox = 1; ox < WO; ++ox) a[ox] += w0 * odd[ox - 1];
              for (int ox = 0; ox <= hi1; ++ox) a[ox] += w1 * even[ox];
              for (int ox = 0; ox <= hi2; ++ox) a[ox] += w2 * odd[ox];
            }
          }
          T* orow = out + n * out_chw + (static_cast<int64_t>(oc) * HO + oy) * WO;
          for (int ox = 0; ox < WO; ++ox) orow[ox] = acc[static_cast<size_t>(ox)];
        }
      }
    }
  }
}

template <typename T>
void conv3x3s2_backward_data(const T* gout, int N, int OC, const T* weight, int C,
                             int H, int W, T* gin, Exec exec) {
  const int HO = conv_out_dim(H), WO = conv_out_dim(W);
  const int64_t in_chw = static_cast<int64_t>(C) * H * W;
  const int64_t out_chw = static_cast<int64_t>(OC) * HO * WO;
  // Row-scatter form of the transposed convolution: for a fixed input row
  // iy at most two (ky, oy) pairs contribute, and for each kx the writes
  // gin[2*ox + kx - 1] += gout[ox] * w sweep ox contiguously. Per input
  // element the contribution order stays (oc, ky, kx), matching the
  // direct per-element formulation bit for bit.
#pragma omp parallel for collapse(2) schedule(static) if (exec == Exec::kParallel)
  for (int n = 0; n < N; ++n) {
    for (int ic = 0; ic < C; ++ic) {
      T* plane = gin + n * in_chw + static_cast<int64_t>(ic) * H * W;
      for (int iy = 0; iy < H; ++iy) {
        T* row = plane + static_cast<int64_t>(iy) * W;
        for (int ix = 0; ix < W; ++ix) row[ix] = T(0);
        for (int oc = 0; oc < OC; ++oc) {
          const T* gplane = gout + n * out_chw + static_cast<int64_t>(oc) * HO * WO;
          const T* wk = weight + (static_cast<int64_t>(oc) * C + ic) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int ty = iy + 1 - ky;
            if (ty < 0 || (ty & 1) != 0) continue;
            const int oy = ty / 2;
            if (oy >= HO) continue;
            const T* grow = gplane + static_cast<int64_t>(oy) * WO;
            for (int kx = 0; kx < 3; ++kx) {
              const T wv = wk[ky * 3 + kx];
              const int lo = kx == 0 ? 1 : 0;
              const int hi = std::min(WO - 1, (W - kx) / 2);
              T* dst = row + (2 * lo + kx - 1);
              for (int ox = lo; ox <= hi; ++ox) dst[2 * (ox - lo)] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3s2_backward_weights(const T* in, int N, int C, int H, int W,
                                const T* gout, int OC, T* gweight, T* gbias,
                                Exec exec) {
  const int HO = conv_out_dim(H), WO = conv_out_dim(W);
  const int64_t in_chw = static_cast<int64_t>(C) * H * W;
  const int64_t out_chw = static_cast<int64_t>(OC) * HO * WO;
  const int wh = (W + 2) / 2;

  // Whole-batch deinterleaved copy, shared read-only by the weight loops.
  std::vector<T> scratch(static_cast<size_t>(N) * C * H * 2 * wh);
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int n = 0; n < N; ++n)
    deinterleave_rows(in + n * in_chw, C, H, W,
                      scratch.data() + static_cast<int64_t>(n) * C * H * 2 * wh);

  const int n_w = OC * C * 9;
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int wi = 0; wi < n_w; ++wi) {
    const int oc = wi / (C * 9);
    const int ic = (wi / 9) % C;
    const int ky = (wi % 9) / 3;
    const int kx = wi % 3;
    const int lo = kx == 0 ? 1 : 0;
    const int hi = std::min(WO - 1, (W - kx) / 2);
    T acc = T(0);
    for (int n = 0; n < N; ++n) {
      const T* planes = scratch.data() + (static_cast<int64_t>(n) * C + ic) * H * 2 * wh;
      const T* gplane = gout + n * out_chw + static_cast<int64_t>(oc) * HO * WO;
      for (int oy = 0; oy < HO; ++oy) {
        const int iy = oy * 2 + ky - 1;
        if (iy < 0 || iy >= H) continue;
        // kx = 1 reads the even phase at ox; kx = 0/2 read the odd phase
        // at ox - 1 / ox. Accumulation stays one serial chain over
        // (n, oy, ox) to match the reference kernel exactly.
        const T* phase = planes + (static_cast<int64_t>(iy) * 2 + (kx == 1 ? 0 : 1)) * wh;
        const T* src = phase + (kx == 0 ? -1 : 0) + lo;
        const T* grow = gplane + static_cast<int64_t>(oy) * WO + lo;
        for (int j = 0; j <= hi - lo; ++j) acc += grow[j] * src[j];
      }
    }
    gweight[wi] = acc;
  }
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int oc = 0; oc < OC; ++oc) {
    T acc = T(0);
    for (int n = 0; n < N; ++n) {
      const T* gplane = gout + n * out_chw + static_cast<int64_t>(oc) * HO * WO;
      for (int i = 0; i < HO * WO; ++i) acc += gplane[i];
    }
    gbias[oc] = acc;
  }
}

// Batch normalization over (N, HW) per channel; biased variance.
template <typename T>
void bn_stats(const T* in, int N, int C, int HW, T* mean, T* var, Exec exec) {
  const int64_t chw = static_cast<int64_t>(C) * HW;
  const T m = T(1) / (static_cast<T>(N) * HW);
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int c = 0; c < C; ++c) {
    T s = T(0);
    for (int n = 0; n < N; ++n) {
      const T* p = in + n * chw + static_cast<int64_t>(c) * HW;
      for (int i = 0; i < HW; ++i) s += p[i];
    }
    const T mu = s * m;
    T v = T(0);
    for (int n = 0; n < N; ++n) {
      const T* p = in + n * chw + static_cast<int64_t>(c) * HW;
      for (int i = 0; i < HW; ++i) {
        const T d = p[i] - mu;
        v += d * d;
      }
    }
    mean[c] = mu;
    var[c] = v * m;
  }
}

// out = relu(gamma * (in - mean) / sqrt(var + eps) + beta) when fuse_relu.
template <typename T>
void bn_forward(const T* in, int N, int C, int HW, const T* mean, const T* var,
                const T* gamma, const T* beta, T eps, bool fuse_relu, T* out,
                Exec exec) {
  const int64_t chw = static_cast<int64_t>(C) * HW;
#pragma omp parallel for collapse(2) schedule(static) if (exec == Exec::kParallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T inv = T(1) / std::sqrt(var[c] + eps);
      const T g = gamma[c] * inv, b = beta[c] - gamma[c] * inv * mean[c];
      const T* p = in + n * chw + static_cast<int64_t>(c) * HW;
      T* q = out + n * chw + static_cast<int64_t>(c) * HW;
      for (int i = 0; i < HW; ++i) {
        const T y = g * p[i] + b;
        q[i] = fuse_relu && y < T(0) ? T(0) : y;
      }
    }
  }
}

// Train-mode batchnorm backward through the fused relu (act is the
// post-relu output; gradients are masked where act == 0 first).
template <typename T>
void bn_relu_backward(const T* in, const T* act, const T* gout, int N, int C,
                      int HW, const T* mean, const T* var, const T* gamma, T eps,
                      T* gin, T* ggamma, T* gbeta, Exec exec) {
  const int64_t chw = static_cast<int64_t>(C) * HW;
  const T m = static_cast<T>(N) * HW;
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int c = 0; c < C; ++c) {
    const T inv = T(1) / std::sqrt(var[c] + eps);
    T sum_dy = T(0), sum_dy_xhat = T(0);
    for (int n = 0; n < N; ++n) {
      const T* p = in + n * chw + static_cast<int64_t>(c) * HW;
      const T* a = act + n * chw + static_cast<int64_t>(c) * HW;
      const T* g = gout + n * chw + static_cast<int64_t>(c) * HW;
      for (int i = 0; i < HW; ++i) {
        const T dy = a[i] > T(0) ? g[i] : T(0);
        sum_dy += dy;
        sum_dy_xhat += dy * (p[i] - mean[c]) * inv;
      }
    }
    ggamma[c] = sum_dy_xhat;
    gbeta[c] = sum_dy;
    const T k1 = gamma[c] * inv;
    for (int n = 0; n < N; ++n) {
      const T* p = in + n * chw + static_cast<int64_t>(c) * HW;
      const T* a = act + n * chw + static_cast<int64_t>(c) * HW;
      const T* g = gout + n * chw + static_cast<int64_t>(c) * HW;
      T* q = gin + n * chw + static_cast<int64_t>(c) * HW;
      for (int i = 0; i < HW; ++i) {
        const T dy = a[i] > T(0) ? g[i] : T(0);
        const T xhat = (p[i] - mean[c]) * inv;
        q[i] = k1 * (dy - sum_dy / m - xhat * sum_dy_xhat / m);
      }
    }
  }
}

// Eval-mode batchnorm + relu with fixed (running) statistics.
template <typename T>
void bn_eval_forward(const T* in, int N, int C, int HW, const T* rmean,
                     const T* rvar, const T* gamma, const T* beta, T eps,
                     bool fuse_relu, T* out, Exec exec) {
  bn_forward(in, N, C, HW, rmean, rvar, gamma, beta, eps, fuse_relu, out, exec);
}

template <typename T>
void gap_forward(const T* in, int N, int C, int HW, T* out, Exec exec) {
  const int64_t chw = static_cast<int64_t>(C) * HW;
#pragma omp parallel for collapse(2) schedule(static) if (exec == Exec::kParallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* p = in + n * chw + static_cast<int64_t>(c) * HW;
      T s = T(0);
      for (int i = 0; i < HW; ++i) s += p[i];
      out[n * C + c] = s / static_cast<T>(HW);
    }
  }
}

template <typename T>
void gap_backward(const T* gout, int N, int C, int HW, T* gin, Exec exec) {
  const int64_t chw = static_cast<int64_t>(C) * HW;
#pragma omp parallel for collapse(2) schedule(static) if (exec == Exec::kParallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T g = gout[n * C + c] / static_cast<T>(HW);
      T* q = gin + n * chw + static_cast<int64_t>(c) * HW;
      for (int i = 0; i < HW; ++i) q[i] = g;
    }
  }
}

// Fully connected: out[n,k] = sum_f in[n,f] * w[k,f] + b[k].
template <typename T>
void fc_forward(const T* in, int N, int F, const T* w, const T* b, int K, T* out,
                Exec exec) {
#pragma omp parallel for collapse(2) schedule(static) if (exec == Exec::kParallel)
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      T acc = b[k];
      const T* wi = w + static_cast<int64_t>(k) * F;
      const T* x = in + static_cast<int64_t>(n) * F;
      for (int f = 0; f < F; ++f) acc += wi[f] * x[f];
      out[n * K + k] = acc;
    }
  }
}

template <typename T>
void fc_backward(const T* in, int N, int F, const T* w, int K, const T* gout,
                 T* gw, T* gb, T* gin, Exec exec) {
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int k = 0; k < K; ++k) {
    T* gwk = gw + static_cast<int64_t>(k) * F;
    for (int f = 0; f < F; ++f) {
      T acc = T(0);
      for (int n = 0; n < N; ++n) acc += gout[n * K + k] * in[static_cast<int64_t>(n) * F + f];
      gwk[f] = acc;
    }
    T acc = T(0);
    for (int n = 0; n < N; ++n) acc += gout[n * K + k];
    gb[k] = acc;
  }
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int n = 0; n < N; ++n) {
    T* q = gin + static_cast<int64_t>(n) * F;
    for (int f = 0; f < F; ++f) {
      T acc = T(0);
      for (int k = 0; k < K; ++k) acc += gout[n * K + k] * w[static_cast<int64_t>(k) * F + f];
      q[f] = acc;
    }
  }
}

/// Softmax probabilities (stable) and, when labels/gradient buffers are
/// given, mean cross-entropy loss with d(loss)/d(logits).
template <typename T>
T softmax_ce(const T* logits, int N, int K, const int* labels, T* probs,
             T* glogits) {
  T loss = T(0);
  for (int n = 0; n < N; ++n) {
    const T* z = logits + n * K;
    T* p = probs + n * K;
    T mx = z[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
    T sum = T(0);
    for (int k = 0; k < K; ++k) {
      p[k] = std::exp(z[k] - mx);
      sum += p[k];
    }
    for (int k = 0; k < K; ++k) p[k] /= sum;
    if (labels) {
      loss -= std::log(std::max(p[labels[n]], std::numeric_limits<T>::min()));
      if (glogits) {
        T* g = glogits + n * K;
        for (int k = 0; k < K; ++k)
          g[k] = (p[k] - (k == labels[n] ? T(1) : T(0))) / static_cast<T>(N);
      }
    }
  }
  return labels ? loss / static_cast<T>(N) : T(0);
}

namespace ref {

// Textbook serial conv used to validate the production kernel; per-element
// accumulation order matches, so results are bit-identical.
template <typename T>
void conv3x3s2_forward(const T* in, int N, int C, int H, int W, const T* weight,
                       const T* bias, int OC, T* out) {
  const int HO = conv_out_dim(H), WO = conv_out_dim(W);
  const int64_t in_chw = static_cast<int64_t>(C) * H * W;
  const int64_t out_chw = static_cast<int64_t>(OC) * HO * WO;
  for (int n = 0; n < N; ++n)
    for (int oc = 0; oc < OC; ++oc)
      for (int oy = 0; oy < HO; ++oy)
        for (int ox = 0; ox < WO; ++ox) {
          T acc = bias[oc];
          for (int ic = 0; ic < C; ++ic)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * 2 + ky - 1, ix = ox * 2 + kx - 1;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += weight[((static_cast<int64_t>(oc) * C + ic) * 3 + ky) * 3 + kx] *
                       in[n * in_chw + (static_cast<int64_t>(ic) * H + iy) * W + ix];
              }
          out[n * out_chw + (static_cast<int64_t>(oc) * HO + oy) * WO + ox] = acc;
        }
}

// Direct per-element transposed convolution.
template <typename T>
void conv3x3s2_backward_data(const T* gout, int N, int OC, const T* weight, int C,
                             int H, int W, T* gin) {
  const int HO = conv_out_dim(H), WO = conv_out_dim(W);
  const int64_t in_chw = static_cast<int64_t>(C) * H * W;
  const int64_t out_chw = static_cast<int64_t>(OC) * HO * WO;
  for (int n = 0; n < N; ++n)
    for (int ic = 0; ic < C; ++ic)
      for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix) {
          T acc = T(0);
          for (int oc = 0; oc < OC; ++oc)
            for (int ky = 0; ky < 3; ++ky) {
              const int ty = iy + 1 - ky;
              if (ty < 0 || (ty & 1) != 0 || ty / 2 >= HO) continue;
              const int oy = ty / 2;
              for (int kx = 0; kx < 3; ++kx) {
                const int tx = ix + 1 - kx;
                if (tx < 0 || (tx & 1) != 0 || tx / 2 >= WO) continue;
                acc += gout[n * out_chw + (static_cast<int64_t>(oc) * HO + oy) * WO + tx / 2] *
                       weight[((static_cast<int64_t>(oc) * C + ic) * 3 + ky) * 3 + kx];
              }
            }
          gin[n * in_chw + (static_cast<int64_t>(ic) * H + iy) * W + ix] = acc;
        }
}

template <typename T>
void conv3x3s2_backward_weights(const T* in, int N, int C, int H, int W,
                                const T* gout, int OC, T* gweight, T* gbias) {
  const int HO = conv_out_dim(H), WO = conv_out_dim(W);
  const int64_t in_chw = static_cast<int64_t>(C) * H * W;
  const int64_t out_chw = static_cast<int64_t>(OC) * HO * WO;
  for (int oc = 0; oc < OC; ++oc)
    for (int ic = 0; ic < C; ++ic)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          T acc = T(0);
          for (int n = 0; n < N; ++n)
            for (int oy = 0; oy < HO; ++oy)
              for (int ox = 0; ox < WO; ++ox) {
                const int iy = oy * 2 + ky - 1, ix = ox * 2 + kx - 1;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += gout[n * out_chw + (static_cast<int64_t>(oc) * HO + oy) * WO + ox] *
                       in[n * in_chw + (static_cast<int64_t>(ic) * H + iy) * W + ix];
              }
          gweight[((static_cast<int64_t>(oc) * C + ic) * 3 + ky) * 3 + kx] = acc;
        }
  for (int oc = 0; oc < OC; ++oc) {
    T acc = T(0);
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < HO * WO; ++i)
        acc += gout[n * out_chw + static_cast<int64_t>(oc) * HO * WO + i];
    gbias[oc] = acc;
  }
}

}  // namespace ref

}  // namespace spx
