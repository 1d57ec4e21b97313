#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace colabmem {

// Raised for every recoverable failure; `kind` is a stable machine-readable
// tag (e.g. "io", "config", "corpus") that the CLI surfaces in error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// FNV-1a, 64-bit. Used for shingles, config hashes and seed derivation so
// results do not depend on the standard library's unspecified std::hash.
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t fnv1a64_u64(std::uint64_t value,
                                    std::uint64_t h = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    h ^= static_cast<unsigned char>(value >> (8 * i));
    h *= kFnvPrime;
  }
  return h;
}

// SplitMix64 finalizer; decorrelates seeds that differ in few bits.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d4f035ae2c475dULL;
  return x ^ (x >> 31);
}

// Every random decision in the pipeline draws from a generator seeded by
// derive_seed(global_seed, stage, entity...). Changing the global seed moves
// all of them; two stages never share a stream.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::string_view> parts) {
  std::uint64_t h = fnv1a64_u64(base);
  for (std::string_view p : parts) {
    h = fnv1a64_u64(p.size(), h);
    h = fnv1a64(p, h);
  }
  return splitmix64(h);
}

// Deterministic RNG. mt19937_64 has a fully specified sequence, and the
// distributions below are implemented here because the standard library's
// are not reproducible across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {
    // Warm a small mt19937_64-free generator: xoshiro256** seeded via splitmix.
    std::uint64_t s = state_;
    for (auto& w : s_) {
      s = splitmix64(s);
      w = s;
    }
  }

  std::uint64_t next_u64() {
    std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 bits of randomness.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Box-Muller; the spare value is cached between calls.
  double normal(double mean = 0.0, double stddev = 1.0);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Number of lines in a text: '\n' count, plus one for a non-empty final
// line that lacks a trailing newline.
std::size_t count_lines(std::string_view text);

// True if `text` is well-formed UTF-8 (no overlong forms, surrogates or
// out-of-range code points).
bool is_valid_utf8(std::string_view text);

// Fraction of Unicode code points that are alphanumeric (ASCII letters and
// digits plus the common letter ranges of the BMP). Returns 0 for empty text.
double alnum_fraction(std::string_view text);

// RFC 4648 base64 with padding; model output is arbitrary bytes, so it is
// stored encoded inside JSON artifacts.
std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace colabmem
