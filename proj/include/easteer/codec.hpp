#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace easteer {

[[nodiscard]] std::string sha256_hex(std::string_view data);
/// First 64 bits of the sha256 digest.
[[nodiscard]] std::uint64_t hash64(std::string_view data);

[[nodiscard]] std::string base64_encode(std::string_view bytes);
/// Throws ProtocolViolation on malformed input.
[[nodiscard]] std::string base64_decode(std::string_view text);

/// Little-endian binary32 payload, base64 encoded.
[[nodiscard]] std::string floats_to_base64(std::span<const float> values);
[[nodiscard]] std::vector<float> floats_from_base64(std::string_view text);

} // namespace easteer
