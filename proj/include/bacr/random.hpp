#ifndef BACR_RANDOM_HPP
#define BACR_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bacr {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed from a root seed and a path of indices, so that
/// per-rollout randomness does not depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t v : path) h = splitmix64(h ^ splitmix64(v + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(root, path));
}

}  // namespace bacr

#endif  // BACR_RANDOM_HPP
