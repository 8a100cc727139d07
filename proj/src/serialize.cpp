#include "gblend/serialize.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "gblend/errors.hpp"

namespace gblend {

using nlohmann::json;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
    throw ArgumentError("malformed float '" + s + "'");
  }
  return v;
}

json tensor_to_json(const Tensor& t) {
  json data = json::array();
  for (double v : t.values()) data.push_back(hex_double(v));
  return {{"shape", t.shape()}, {"data", std::move(data)}};
}

Tensor tensor_from_json(const json& j) {
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  std::vector<double> data;
  for (const auto& v : j.at("data")) {
    data.push_back(v.is_string() ? parse_hex_double(v.get<std::string>()) : v.get<double>());
  }
  return Tensor(std::move(shape), std::move(data));
}

json mlp_to_json(const Mlp& m) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"activation", to_string(l.activation)},
                      {"weights", tensor_to_json(l.weights)},
                      {"bias", tensor_to_json(l.bias)}});
  }
  return {{"layers", std::move(layers)},
          {"dropout_rate", hex_double(m.dropout_rate)},
          {"dropout_layer", m.dropout_layer}};
}

Mlp mlp_from_json(const json& j) {
  Mlp m;
  for (const auto& l : j.at("layers")) {
    m.layers.push_back({tensor_from_json(l.at("weights")), tensor_from_json(l.at("bias")),
                        activation_from_string(l.at("activation").get<std::string>())});
  }
  m.dropout_rate = parse_hex_double(j.at("dropout_rate").get<std::string>());
  m.dropout_layer = j.at("dropout_layer").get<std::size_t>();
  m.validate();
  return m;
}

std::uint64_t digest(std::span<const double> values, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string digest_hex(std::uint64_t d) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

}  // namespace gblend
