#include "qklab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qklab {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix(seed_ + counter_ * kGamma);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::next_below: n must be > 0");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = n * (UINT64_MAX / n);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

double Rng::next_normal() {
  // Box-Muller; u1 bounded away from 0.
  double u1 = next_double();
  double u2 = next_double();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::stream(std::uint64_t tag) const {
  return Rng(mix(seed_ ^ mix(tag ^ 0x5851f42d4c957f2dULL)));
}

Rng Rng::stream(std::string_view tag) const { return stream(fnv1a64(tag)); }

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

long binomial_draw(Rng& rng, long shots, double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("binomial_draw: p outside [0,1]");
  if (shots < 1) throw std::invalid_argument("binomial_draw: shots must be >= 1");
  long k = 0;
  for (long s = 0; s < shots; ++s)
    if (rng.next_double() < p) ++k;
  return k;
}

}  // namespace qklab
