#pragma once

#include <span>

#include "mosaic/pattern.hpp"

namespace mosaic {

/// Nearest-neighbor block replication: every pixel becomes a 2^e x 2^e block.
/// Throws ExponentOverflow when p + e > 11.
[[nodiscard]] Pattern enlarge(const Pattern& pattern, int enlarge_exponent);

/// Tiles the pattern 2^r times along both axes. Throws ExponentOverflow when p + r > 11.
[[nodiscard]] Pattern repeat(const Pattern& pattern, int repeat_exponent);

/// repeat(enlarge(pattern, e), r). The pattern exponent must match cfg.
[[nodiscard]] Texture er_construct(const Pattern& pattern, const ErConfig& cfg);

/// Writes texture row `row` of er_construct(pattern, cfg) into out (2048 * 3 bytes).
void er_row(const Pattern& pattern, const ErConfig& cfg, std::size_t row, std::span<std::uint8_t> out);

/**
 * Bilinear upsampling to 2048 x 2048 with half-pixel-center alignment:
 * output pixel i samples source coordinate (i + 0.5) * side / 2048 - 0.5,
 * clamped to the edge. Channels round half up and clamp to [0, 255].
 */
[[nodiscard]] Texture bilinear_resize(const Pattern& pattern);

/// Inverse of er_construct: samples one pixel per block of the first tile.
[[nodiscard]] Pattern recover_pattern(const Texture& texture, const ErConfig& cfg);

}  // namespace mosaic
