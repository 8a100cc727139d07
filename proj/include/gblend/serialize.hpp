#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <json.hpp>

#include "gblend/nn.hpp"
#include "gblend/tensor.hpp"

namespace gblend {

inline constexpr int kCheckpointVersion = 1;

// Doubles are written as C99 hex-float strings ("0x1.8p+1") so a JSON
// round-trip is bit-exact.
std::string hex_double(double v);
double parse_hex_double(const std::string& s);

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

nlohmann::json mlp_to_json(const Mlp& m);
Mlp mlp_from_json(const nlohmann::json& j);

// FNV-1a over the raw bytes of the values; used to detect parameter mutation.
std::uint64_t digest(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string digest_hex(std::uint64_t d);

}  // namespace gblend
