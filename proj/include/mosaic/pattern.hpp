#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mosaic {

/// Final texture side exponent: every camouflage texture is 2^11 = 2048 pixels square.
inline constexpr int kTextureExponent = 11;
inline constexpr std::size_t kTextureSide = std::size_t{1} << kTextureExponent;
inline constexpr std::size_t kChannels = 3;

struct Rgb {
    std::uint8_t r{0};
    std::uint8_t g{0};
    std::uint8_t b{0};

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

class ExponentOverflow : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * A 2^p x 2^p RGB grid, row-major with interleaved channels.
 *
 * Channels are stored as bytes, so the [0, 255] range invariant holds by
 * construction; only the side exponent needs checking.
 */
class Pattern {
public:
    /// Zero-filled (black) pattern.
    explicit Pattern(int side_exponent);
    Pattern(int side_exponent, std::vector<std::uint8_t> channels);

    [[nodiscard]] int exponent() const noexcept { return exponent_; }
    [[nodiscard]] std::size_t side() const noexcept { return std::size_t{1} << exponent_; }
    [[nodiscard]] std::size_t channel_count() const noexcept { return channels_.size(); }

    [[nodiscard]] Rgb pixel(std::size_t row, std::size_t col) const noexcept {
        const std::size_t o = (row * side() + col) * kChannels;
        return {channels_[o], channels_[o + 1], channels_[o + 2]};
    }
    void set_pixel(std::size_t row, std::size_t col, Rgb c) noexcept {
        const std::size_t o = (row * side() + col) * kChannels;
        channels_[o] = c.r;
        channels_[o + 1] = c.g;
        channels_[o + 2] = c.b;
    }

    [[nodiscard]] std::span<const std::uint8_t> channels() const noexcept { return channels_; }
    [[nodiscard]] std::span<std::uint8_t> channels() noexcept { return channels_; }

    friend bool operator==(const Pattern&, const Pattern&) = default;

private:
    int exponent_;
    std::vector<std::uint8_t> channels_;
};

/// Uniform pattern of a single color.
[[nodiscard]] Pattern uniform_pattern(int side_exponent, Rgb color);

/// The full-size 2048 x 2048 camouflage texture.
class Texture {
public:
    /// Black texture.
    Texture();
    /// Adopts a pattern whose exponent must be 11.
    explicit Texture(Pattern full);

    [[nodiscard]] static constexpr std::size_t side() noexcept { return kTextureSide; }
    [[nodiscard]] Rgb pixel(std::size_t row, std::size_t col) const noexcept {
        return grid_.pixel(row, col);
    }
    [[nodiscard]] std::span<const std::uint8_t> channels() const noexcept { return grid_.channels(); }
    [[nodiscard]] const Pattern& grid() const noexcept { return grid_; }

    friend bool operator==(const Texture&, const Texture&) = default;

private:
    Pattern grid_;
};

/**
 * Enlarge-and-Repeat configuration. Pattern side 2^p, each pixel enlarged to a
 * 2^e block, the enlarged pattern tiled 2^r times per axis; p + e + r == 11.
 */
struct ErConfig {
    int pattern_exponent{4};
    int enlarge_exponent{5};
    int repeat_exponent{2};

    /// Throws ConfigMismatch unless all exponents are non-negative and sum to 11.
    void validate() const;

    /// "E5-R2" style label.
    [[nodiscard]] std::string label() const;
    /// Parses "E<e>-R<r>"; p is implied as 11 - e - r.
    [[nodiscard]] static ErConfig from_label(const std::string& label);

    friend bool operator==(const ErConfig&, const ErConfig&) = default;
};

}  // namespace mosaic
