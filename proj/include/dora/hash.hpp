#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace dora {

using Digest = std::array<std::uint8_t, 32>;

// Message digests are 32 bytes over the canonical serialization. The function
// is pluggable; sha256 is the default.
using HashFn = std::function<Digest(const std::uint8_t*, std::size_t)>;

Digest sha256(const std::uint8_t* data, std::size_t len);
Digest sha256(const std::vector<std::uint8_t>& data);

HashFn default_hash();

std::string hex_encode(const std::uint8_t* data, std::size_t len);
std::string hex_encode(const Digest& d);

}  // namespace dora
