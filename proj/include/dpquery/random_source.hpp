#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dpquery {

// Deterministic random source with labeled substreams.
//
// Guarantees required by the engine:
//  - identical seed + identical label path => bit-identical draw sequence,
//    on every platform (mt19937_64 is fully specified by the standard, and
//    doubles are produced by explicit bit manipulation rather than
//    uniform_real_distribution, whose output is implementation-defined);
//  - Substream(label) depends only on the parent's seed and the label, never
//    on how many draws the parent has made, so evaluation order of sibling
//    streams cannot change results.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  // Derives an independent child stream. Same (seed, label) => same child.
  RandomSource Substream(std::string_view label) const;

  std::uint64_t NextUint64();

  // Unbiased draw from [0, bound). pre: bound >= 1.
  std::uint64_t NextUint64Below(std::uint64_t bound);

  // Uniform draw from the open interval (0, 1); never returns 0 or 1, so it
  // is safe to feed through log() in inverse-CDF sampling.
  double NextUniform();

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace dpquery
