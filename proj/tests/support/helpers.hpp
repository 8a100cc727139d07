#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gblend/rng.hpp"
#include "gblend/tensor.hpp"

namespace gblend::test {

inline Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

// Moves a parameter vector off the zero-bias init. With zero biases a row whose
// upstream relus are all dead sits exactly on a kink, where central differences
// see half the slope.
inline std::vector<double> jitter(std::vector<double> p, std::uint64_t seed, double scale = 0.1) {
  Rng rng(RngSeed{seed});
  for (auto& v : p) v += scale * rng.normal();
  return p;
}

// max_i |a_i - b_i| / max(1, max_i |b_i|)
inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 1e-300;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / std::max(1.0, scale);
}

// Per-coordinate relative error with an absolute floor, as in standard gradient checks.
inline double max_rel_error(std::span<const double> a, std::span<const double> b,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace gblend::test
