#pragma once

// Counter-based random streams (Philox4x32-10) plus the handful of scalar
// distributions the samplers need.  Counter mode gives us cheap, collision-free
// substreams: every chain, replicate and setting derives its own key from the
// master seed and a tag path, so results are reproducible regardless of
// scheduling and never depend on platform library internals.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

#include "effusion/errors.hpp"
#include "effusion/hash.hpp"

namespace effusion::rng {

constexpr std::uint64_t golden64 = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer; bijective with strong avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += golden64;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Key derivation: fold a tag string and any number of integer coordinates
// into the parent seed.  derive(seed, "chain", 3) != derive(seed, "chain", 4).
constexpr std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
  return mix64(seed ^ fnv1a64(tag));
}
template <typename... Ints>
constexpr std::uint64_t derive(std::uint64_t seed, std::string_view tag,
                               std::uint64_t head, Ints... rest) {
  std::uint64_t h = mix64(derive(seed, tag) ^ (head + golden64));
  if constexpr (sizeof...(rest) == 0)
    return h;
  else
    return derive(h, tag, static_cast<std::uint64_t>(rest)...);
}

// Philox4x32-10 stream producing 64-bit words.  Satisfies
// std::uniform_random_bit_generator.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream() : Stream(0) {}
  explicit Stream(std::uint64_t key)
      : key0_(static_cast<std::uint32_t>(key)),
        key1_(static_cast<std::uint32_t>(key >> 32)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    if (have_ == 0) refill();
    return buf_[--have_];
  }

  // Uniform on [0,1), 53 random mantissa bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  // Uniform on (0,1]; safe under log().
  double uniform_pos() { return 1.0 - uniform(); }

  // Standard normal, Box-Muller cosine branch (stateless, two words a draw).
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Gamma(shape, scale 1) by Marsaglia-Tsang squeeze; shape boost below 1.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw NumericalError("gamma draw requires shape > 0");
    if (shape < 1.0) {
      double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Inverse gamma with density proportional to x^-(shape+1) exp(-scale/x).
  double inv_gamma(double shape, double scale) {
    if (!(scale > 0.0))
      throw NumericalError("inverse-gamma draw requires scale > 0");
    return scale / gamma(shape);
  }

  // Exponential with the given mean.
  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  // Index draw from explicit probabilities (assumed to sum to ~1).
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  static std::uint32_t mulhi(std::uint32_t a, std::uint32_t b) {
    return static_cast<std::uint32_t>(
        (static_cast<std::uint64_t>(a) * b) >> 32);
  }

  void refill() {
    std::uint32_t c0 = static_cast<std::uint32_t>(ctr_);
    std::uint32_t c1 = static_cast<std::uint32_t>(ctr_ >> 32);
    std::uint32_t c2 = 0x2e707344u;  // constant upper counter lanes
    std::uint32_t c3 = 0x6c617073u;
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      const std::uint32_t lo0 = 0xd2511f53u * c0;
      const std::uint32_t hi0 = mulhi(0xd2511f53u, c0);
      const std::uint32_t lo1 = 0xcd9e8d57u * c2;
      const std::uint32_t hi1 = mulhi(0xcd9e8d57u, c2);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += 0x9e3779b9u;
      k1 += 0xbb67ae85u;
    }
    buf_[1] = (static_cast<std::uint64_t>(c1) << 32) | c0;
    buf_[0] = (static_cast<std::uint64_t>(c3) << 32) | c2;
    have_ = 2;
    ++ctr_;
  }

  std::uint32_t key0_, key1_;
  std::uint64_t ctr_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int have_ = 0;
};

}  // namespace effusion::rng
