#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cdw/lattice.hpp"

namespace cdw::support {

// Disorder whose Laplacian is `target` (which must sum to zero), found by
// marching the second-difference recurrence and fixing the free slope.
inline Disorder disorder_with_laplacian(const std::vector<double>& target) {
  const std::size_t n = target.size();
  auto march = [&](double slope) {
    std::vector<double> a(n + 1);
    a[0] = 0.0;
    a[1] = slope;
    for (std::size_t i = 1; i < n; ++i) a[i + 1] = 2.0 * a[i] - a[i - 1] + target[i];
    return a;
  };
  const double slope = -march(0.0)[n] / static_cast<double>(n);
  auto a = march(slope);
  a.pop_back();
  return Disorder::from_alpha(RealField(std::move(a)));
}

inline IntField random_field(std::mt19937_64& rng, std::size_t n, int lo, int hi) {
  std::uniform_int_distribution<int> dist(lo, hi);
  IntField m(n);
  for (auto& v : m) v = dist(rng);
  return m;
}

}  // namespace cdw::support
