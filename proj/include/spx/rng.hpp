// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

namespace spx {

/// Mixes one 64-bit step of the splitmix64 sequence. Used to expand seeds
/// and to derive independent stream seeds; the constants are the reference
/// ones, so any implementation of splitmix64 reproduces the values.
uint64_t splitmix64(uint64_t& state);

/// Derives a stream seed from a base seed and a tag path, e.g.
/// derive_seed(seed, {kStreamSignal, class_id}). Streams with different
/// paths are statistically independent.
uint64_t derive_seed(uint64_t base, std::span<const uint64_t> path);
uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path);

// Stream tags. Every stochastic operation in the pipeline draws from a
// stream derived with one of these, so runs are reproducible and
// individual stages can be re-executed in isolation.
inline constexpr uint64_t kStreamSignal = 1;     // per-class signal synthesis
inline constexpr uint64_t kStreamTrainInit = 2;  // weight initialization
inline constexpr uint64_t kStreamTrainData = 3;  // training window sampling
inline constexpr uint64_t kStreamValData = 4;    // validation window sampling
inline constexpr uint64_t kStreamExplain = 5;    // LIME mask sampling
inline constexpr uint64_t kStreamRetrain = 6;    // per-retraining seeds

/// xoshiro256++ generator with explicit state. All stochastic operations
/// take an Rng (or a seed) rather than touching globals, so concurrent
/// workers use independent streams and results do not depend on
/// scheduling.
///
/// The bit-level outputs of next(), uniform(), below(), and normal() are
/// part of the reproducibility contract and are documented in README.md.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  /// Next raw 64-bit output.
  uint64_t next();

  /// Uniform double in [0, 1) with 53 random bits: (next() >> 11) * 2^-53.
  double uniform();

  /// Uniform integer in [0, n), n > 0. Unbiased via rejection sampling on
  /// the top bits.
  uint64_t below(uint64_t n);

  /// Standard normal via Box-Muller: sqrt(-2 ln(1-u1)) * cos(2 pi u2).
  /// Always consumes exactly two uniforms; no cached spare, so the draw
  /// sequence is position-independent.
  double normal();

 private:
  uint64_t s_[4];
};

}  // namespace spx
