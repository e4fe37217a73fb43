#pragma once

#include "tsvs/data_model.hpp"
#include "tsvs/error.hpp"

#include <random>

namespace tsvs::testing {

inline Matrix random_matrix(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = z(rng);
  return X;
}

inline Vector random_vector(int n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

// Kind of the Error thrown by `f`; Io stands in for "nothing thrown".
inline ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

}  // namespace tsvs::testing
