#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mosaic/pattern.hpp"

namespace mosaic {

/// 64-bit content digest (leading bytes of SHA-256 over exponent and channels).
using ContentHash = std::uint64_t;

[[nodiscard]] ContentHash content_hash(const Pattern& pattern);
[[nodiscard]] std::string hash_hex(ContentHash hash);
[[nodiscard]] ContentHash parse_hash_hex(std::string_view hex);

[[nodiscard]] std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on malformed input.
[[nodiscard]] std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace mosaic
