#pragma once

#include <cstdint>
#include <string_view>

namespace qklab {

/// Deterministic 64-bit counter-based generator (SplitMix64).
///
/// Output i is mix(seed + i*GAMMA): a pure function of (seed, counter),
/// identical on every platform and thread count. Substreams derive from the
/// immutable seed, child = mix(seed ^ mix(tag)), so per-split / per-fold /
/// per-class streams do not depend on how much the parent has consumed.
/// All randomness in the library goes through this class; std::
/// distributions are avoided because their output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t next_u64();

  /// Uniform on [0,1) with 53 random bits.
  double next_double();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  /// Standard normal via Box-Muller (no state cached across calls).
  double next_normal();

  /// Child generator for an independent named substream, derived from the
  /// seed alone.
  Rng stream(std::uint64_t tag) const;
  Rng stream(std::string_view tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// FNV-1a 64-bit hash; used for stream tags and artifact content hashes.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

/// Binomial(shots, p) draw by counting Bernoulli successes. O(shots), exact
/// and portable.
long binomial_draw(Rng& rng, long shots, double p);

}  // namespace qklab
