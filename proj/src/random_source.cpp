#include "dpquery/random_source.hpp"

namespace dpquery {
namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed)
    : seed_(seed), engine_(SplitMix64(seed)) {}

RandomSource RandomSource::Substream(std::string_view label) const {
  // Mix rather than xor alone so ("a","b") and ("b","a") label paths diverge.
  return RandomSource(SplitMix64(seed_ ^ SplitMix64(Fnv1a64(label))));
}

std::uint64_t RandomSource::NextUint64() { return engine_(); }

std::uint64_t RandomSource::NextUint64Below(std::uint64_t bound) {
  // Rejection sampling over the largest multiple of bound, so every value in
  // [0, bound) is exactly equally likely.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double RandomSource::NextUniform() {
  // 53-bit mantissa draw shifted off the interval endpoints: (k + 0.5) / 2^53.
  const std::uint64_t k = engine_() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

}  // namespace dpquery
