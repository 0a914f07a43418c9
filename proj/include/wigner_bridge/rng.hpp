#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace wigner {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a list of words into one stream key. Order matters.
constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t k = mix64(seed + 0x9e3779b97f4a7c15ULL);
  for (auto p : parts) k = mix64(k ^ (p + 0x9e3779b97f4a7c15ULL + (k << 6) + (k >> 2)));
  return k;
}

// Stream tags, so that e.g. entry (i, j) and eigenvector phase j never share a key.
namespace stream_tag {
inline constexpr std::uint64_t offdiag = 0x6f6664;
inline constexpr std::uint64_t diag = 0x646961;
inline constexpr std::uint64_t phase = 0x706861;
inline constexpr std::uint64_t haar = 0x686161;
inline constexpr std::uint64_t replica = 0x726570;
inline constexpr std::uint64_t matrix = 0x6d6174;
inline constexpr std::uint64_t swap_b = 0x737762;
}  // namespace stream_tag

/// Counter-based generator: output k is mix64(key + (k+1)*golden).
/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
/// Two streams with distinct keys are independent for all practical purposes,
/// which is what makes per-site and per-replica sampling reproducible.
class KeyedStream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr KeyedStream(std::uint64_t key) noexcept : key_(key) {}
  KeyedStream(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept
      : key_(derive_key(seed, parts)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix64(key_ + counter_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace wigner
