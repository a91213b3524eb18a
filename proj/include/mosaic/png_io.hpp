#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mosaic/pattern.hpp"

namespace mosaic {

class PngError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 24-bit RGB, non-interlaced, no ancillary chunks. Identical pixels give identical bytes.
[[nodiscard]] std::vector<std::uint8_t> encode_png(const Pattern& image);
[[nodiscard]] std::vector<std::uint8_t> encode_png(const Texture& texture);

/// Returns a pointer to row `row` (side * 3 bytes), valid until the next call.
using RowSource = std::function<const std::uint8_t*(std::size_t row)>;
/// Streaming form of encode_png for images that are never held in memory whole.
[[nodiscard]] std::vector<std::uint8_t> encode_png_rows(std::size_t side, const RowSource& row_at);

/// Decodes any 8-bit PNG to RGB (alpha is dropped, gray is expanded). The image
/// must be square with a power-of-two side no larger than 2048.
[[nodiscard]] Pattern decode_png(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const Pattern& image);
void write_png(const std::filesystem::path& path, const Texture& texture);
[[nodiscard]] Pattern read_png(const std::filesystem::path& path);

}  // namespace mosaic
