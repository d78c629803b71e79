#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace mam {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double gaussian(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

/// Student-t with 2 degrees of freedom: Z / sqrt(chi2_2 / 2).
inline double student_t2(Rng& rng) {
  const double z = gaussian(rng);
  const double chi2 = std::chi_squared_distribution<double>(2.0)(rng);
  return z / std::sqrt(chi2 / 2.0);
}

/// k distinct indices from [0, n), uniformly, returned in increasing order.
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                           std::size_t k) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(k);
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

/// round(r * n) with halves rounded away from zero, as used for every
/// corruption count.
inline std::size_t fraction_count(double r, std::size_t n) {
  return static_cast<std::size_t>(std::llround(r * static_cast<double>(n)));
}

}  // namespace mam
