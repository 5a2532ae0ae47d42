// SPDX-License-Identifier: Apache-2.0
#include "spx/rng.hpp"

#include <cmath>
#include <numbers>

namespace spx {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t base, std::span<const uint64_t> path) {
  uint64_t s = base;
  for (uint64_t tag : path) {
    s ^= tag + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
    uint64_t st = s;
    s = splitmix64(st);
  }
  return s;
}

uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  return derive_seed(base, std::span<const uint64_t>(path.begin(), path.size()));
}

Rng::Rng(uint64_t seed) {
  // Expand the seed with splitmix64 per the xoshiro authors' guidance.
  uint64_t sm = seed;
  for (auto& w : s_) w = splitmix64(sm);
}

static inline uint64_t rotl(uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

uint64_t Rng::next() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

uint64_t Rng::below(uint64_t n) {
  // Rejection on the high bits keeps the mapping unbiased and portable.
  const uint64_t threshold = -n % n;  // 2^64 mod n
  for (;;) {
    uint64_t r = next();
    if (r >= threshold) return r % n;
  }
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace spx
