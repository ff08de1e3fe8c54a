#pragma once

#include <cstdint>

// Standard normal helpers and the counter-based uniform generator shared by
// the sampling and quasi-Monte-Carlo code.
namespace ccvolt::normal {

double pdf(double x);
double cdf(double x);

/// Phi(b) - Phi(a) without cancellation in the upper tail. Infinite limits allowed.
double interval(double a, double b);

/// Inverse of cdf, Wichura's AS241 (about 1e-16 relative accuracy). p in (0, 1).
double quantile(double p);

/// SplitMix64 output function; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform in the open interval (0, 1), a pure function of (seed, counter).
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace ccvolt::normal
