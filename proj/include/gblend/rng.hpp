#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gblend {

struct RngSeed {
  std::uint64_t value = 0;
  friend bool operator==(RngSeed, RngSeed) = default;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Sub-seed for a labelled stream ("head:2", "init", "trial:17"...). Streams with
// different labels are independent and the mapping is stable across platforms.
RngSeed derive_seed(RngSeed root, std::string_view label) noexcept;
RngSeed derive_seed(RngSeed root, std::string_view label, std::uint64_t index) noexcept;

class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(splitmix64(seed.value)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gblend
