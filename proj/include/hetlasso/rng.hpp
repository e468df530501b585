#pragma once

// Deterministic random number generation with documented substream derivation.
//
// All randomness in the library flows through Xoshiro256++ generators seeded
// via SplitMix64. A (seed, stream tag) pair fully determines a substream, so
// each component of a generated dataset (design matrix, scales, signal,
// observation noise, perturbation) is independently reproducible: sweeps can
// redraw the perturbation while holding the data fixed.
//
// Gaussians use Box-Muller on the raw 53-bit uniforms, so sampled values are
// bit-identical across platforms for a given seed.

#include <cmath>
#include <cstdint>

namespace hetlasso {

// Substream identifiers. The numeric values are part of the on-disk
// reproducibility contract; do not renumber.
enum class StreamTag : std::uint64_t {
  kScales = 1,       // covariate scales v
  kDesign = 2,       // base design matrix F-tilde
  kSignal = 3,       // ground-truth signal x0
  kObsNoise = 4,     // observation noise xi
  kEta = 5,          // objective perturbation eta
  kAmpInitX = 6,     // AMP x-hat initialization
  kAmpInitS = 7,     // AMP s initialization
  kMonteCarlo = 8,   // Monte-Carlo integrators
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Xoshiro256++ (Blackman & Vigna), state expanded from a 64-bit seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  // Derives the generator for (seed, tag). Two SplitMix64 rounds decorrelate
  // nearby seeds before the tag is folded in.
  static Rng substream(std::uint64_t seed, StreamTag tag) {
    std::uint64_t sm = seed;
    splitmix64(sm);
    std::uint64_t mixed = splitmix64(sm) ^ (0xD1342543DE82EF95ULL * static_cast<std::uint64_t>(tag));
    return Rng(mixed);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; never returns exact zero.
  double uniform_unit() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Standard normal via Box-Muller; pairs are cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_unit();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace hetlasso
