#include "gblend/rng.hpp"

namespace gblend {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngSeed derive_seed(RngSeed root, std::string_view label) noexcept {
  return {splitmix64(root.value ^ splitmix64(fnv1a(label)))};
}

RngSeed derive_seed(RngSeed root, std::string_view label, std::uint64_t index) noexcept {
  return {splitmix64(derive_seed(root, label).value + splitmix64(index))};
}

}  // namespace gblend
