#ifndef CNNLAB_RNG_HPP_
#define CNNLAB_RNG_HPP_

#include <cstdint>
#include <random>

namespace cnnlab {

// splitmix64 finalizer. Used to turn (master seed XOR stream index) into a
// well-mixed engine seed so that per-trial streams are independent and
// reproducible regardless of scheduling.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

using Rng = std::mt19937_64;

// Uniform in [0, 1). Mantissa-based conversion so the value stream depends
// only on the engine, not on library internals.
inline double uniform01(Rng& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& g, std::uint64_t n) {
  return g() % n;
}

}  // namespace cnnlab

#endif  // CNNLAB_RNG_HPP_
