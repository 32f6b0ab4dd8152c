#pragma once

#include "cmeta/core.hpp"

#include <random>
#include <string>

namespace cmeta::testing {

/// Random dataset with K in [1, max_k] and counts in [min_count, max_count].
inline MetaDataset random_dataset(std::mt19937_64& rng, int max_k = 10, Count min_count = 1, Count max_count = 1000) {
  std::uniform_int_distribution<int> k_dist(1, max_k);
  std::uniform_int_distribution<Count> c_dist(min_count, max_count);
  MetaDataset ds;
  ds.name = "random";
  const int k = k_dist(rng);
  for (int i = 0; i < k; ++i) {
    StudyTable s{"s" + std::to_string(i + 1), c_dist(rng), c_dist(rng), c_dist(rng), c_dist(rng)};
    // keep arms non-empty when zero counts are allowed
    if (s.treated() == 0) s.n10 = 1;
    if (s.control() == 0) s.n00 = 1;
    ds.studies.push_back(s);
  }
  return ds;
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace cmeta::testing
