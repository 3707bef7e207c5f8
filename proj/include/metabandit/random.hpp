#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace metabandit {

// SplitMix64 finalizer. Used only to derive independent stream seeds, never
// as the sampling engine itself.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// xoshiro256** (Blackman & Vigna). Chosen over std::mt19937_64 because every
/// episode gets its own stream and this engine seeds in a few nanoseconds.
/// Satisfies UniformRandomBitGenerator, so <random> distributions apply.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  explicit Xoshiro256(std::uint64_t seed = 0) noexcept { this->seed(seed); }

  void seed(std::uint64_t seed) noexcept {
    // State expanded with SplitMix64, as its authors recommend.
    std::uint64_t x = seed;
    for (auto& w : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      w = z ^ (z >> 31);
    }
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4]{};
};

using Rng = Xoshiro256;

/// Derives a stream seed from a root seed and a path of coordinates, e.g.
/// (experiment seed, problem index, run index). Distinct paths give
/// statistically independent streams; the result only depends on the path,
/// never on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(root ^ 0x6a09e667f3bcc908ULL);
  for (std::uint64_t c : path) h = mix64(h ^ mix64(c + 0x3c6ef372fe94f82bULL));
  return h;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(root, path));
}

// Stream-family tags so that unrelated consumers of one master seed never
// collide.
namespace stream {
inline constexpr std::uint64_t kTrainProblems = 0x747261696eULL;
inline constexpr std::uint64_t kTestProblems = 0x74657374ULL;
inline constexpr std::uint64_t kTuning = 0x74756e65ULL;
inline constexpr std::uint64_t kEvaluation = 0x6576616cULL;
inline constexpr std::uint64_t kFormulaSamples = 0x666f726dULL;
inline constexpr std::uint64_t kMetaBandit = 0x6d657461ULL;
}  // namespace stream

/// Uniform double in [0,1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace metabandit
