#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "optrank/types.hpp"

namespace optrank {

// splitmix64 step; the standard finalizer constants.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Splittable seed derivation: folds every tag into the master seed through
// splitmix64. Used everywhere a sub-stream is needed, e.g.
//   mix_seed(master, kTrainData, row, n, trial)
// so per-cell streams are independent of execution order and worker count.
inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ t);
  return h;
}

// Stream purposes for mix_seed tags.
enum SeedTag : std::uint64_t {
  kTrainData = 0xA1,
  kInitPoint = 0xB2,
  kTestData = 0xC3,
  kTargetGen = 0xD4,
  kProbes = 0xE5,
};

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Vector normal_vector(std::mt19937_64& rng, Index n, Scalar stddev = 1.0) {
  std::normal_distribution<Scalar> dist(0.0, stddev);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

// Row-major fill so that probe matrices are reproducible row by row.
inline Matrix normal_matrix(std::mt19937_64& rng, Index rows, Index cols, Scalar stddev = 1.0) {
  std::normal_distribution<Scalar> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace optrank
