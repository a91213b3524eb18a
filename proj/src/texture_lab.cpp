#include "mosaic/texture_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace mosaic {

namespace {

void check_sum(int p, int k, const char* what) {
    if (k < 0) {
        throw ExponentOverflow(std::string(what) + " exponent must be non-negative");
    }
    if (p + k > kTextureExponent) {
        throw ExponentOverflow(std::string(what) + " exponent " + std::to_string(k) +
                               " overflows pattern exponent " + std::to_string(p) +
                               " past 2048 pixels");
    }
}

}  // namespace

Pattern enlarge(const Pattern& pattern, int enlarge_exponent) {
    check_sum(pattern.exponent(), enlarge_exponent, "enlarge");
    const int out_exp = pattern.exponent() + enlarge_exponent;
    Pattern out(out_exp);
    const std::size_t out_side = out.side();
    auto src = pattern.channels();
    auto dst = out.channels();
    // Build one output row per source row, then copy it down the block.
    for (std::size_t row = 0; row < out_side; ++row) {
        const std::size_t src_row = row >> enlarge_exponent;
        std::uint8_t* line = dst.data() + row * out_side * kChannels;
        if ((row & ((std::size_t{1} << enlarge_exponent) - 1)) != 0) {
            std::memcpy(line, line - out_side * kChannels, out_side * kChannels);
            continue;
        }
        for (std::size_t col = 0; col < out_side; ++col) {
            const std::uint8_t* px =
                src.data() + (src_row * pattern.side() + (col >> enlarge_exponent)) * kChannels;
            std::memcpy(line + col * kChannels, px, kChannels);
        }
    }
    return out;
}

Pattern repeat(const Pattern& pattern, int repeat_exponent) {
    check_sum(pattern.exponent(), repeat_exponent, "repeat");
    Pattern out(pattern.exponent() + repeat_exponent);
    const std::size_t in_side = pattern.side();
    const std::size_t out_side = out.side();
    const std::size_t in_row_bytes = in_side * kChannels;
    auto src = pattern.channels();
    auto dst = out.channels();
    for (std::size_t row = 0; row < out_side; ++row) {
        const std::uint8_t* src_line = src.data() + (row % in_side) * in_row_bytes;
        std::uint8_t* line = dst.data() + row * out_side * kChannels;
        for (std::size_t tile = 0; tile < out_side / in_side; ++tile) {
            std::memcpy(line + tile * in_row_bytes, src_line, in_row_bytes);
        }
    }
    return out;
}

Texture er_construct(const Pattern& pattern, const ErConfig& cfg) {
    cfg.validate();
    if (pattern.exponent() != cfg.pattern_exponent) {
        throw ConfigMismatch("pattern exponent " + std::to_string(pattern.exponent()) +
                             " does not match " + cfg.label() + " (p=" +
                             std::to_string(cfg.pattern_exponent) + ")");
    }
    return Texture(repeat(enlarge(pattern, cfg.enlarge_exponent), cfg.repeat_exponent));
}

void er_row(const Pattern& pattern, const ErConfig& cfg, std::size_t row, std::span<std::uint8_t> out) {
    const std::size_t mask = pattern.side() - 1;
    const int e = cfg.enlarge_exponent;
    const std::uint8_t* src = pattern.channels().data() + ((row >> e) & mask) * pattern.side() * kChannels;
    for (std::size_t col = 0; col < kTextureSide; ++col) {
        std::memcpy(out.data() + col * kChannels, src + ((col >> e) & mask) * kChannels, kChannels);
    }
}

Texture bilinear_resize(const Pattern& pattern) {
    const std::size_t in_side = pattern.side();
    const double scale = static_cast<double>(in_side) / static_cast<double>(kTextureSide);
    const double max_coord = static_cast<double>(in_side - 1);

    // Separable weights; the same table serves rows and columns.
    struct Tap {
        std::size_t lo, hi;
        double frac;
    };
    std::vector<Tap> taps(kTextureSide);
    for (std::size_t i = 0; i < kTextureSide; ++i) {
        double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, max_coord);
        const auto lo = static_cast<std::size_t>(std::floor(s));
        const std::size_t hi = std::min(lo + 1, in_side - 1);
        taps[i] = {lo, hi, s - static_cast<double>(lo)};
    }

    Pattern out(kTextureExponent);
    auto src = pattern.channels();
    auto dst = out.channels();
    for (std::size_t row = 0; row < kTextureSide; ++row) {
        const Tap& ty = taps[row];
        for (std::size_t col = 0; col < kTextureSide; ++col) {
            const Tap& tx = taps[col];
            for (std::size_t c = 0; c < kChannels; ++c) {
                auto at = [&](std::size_t r, std::size_t q) {
                    return static_cast<double>(src[(r * in_side + q) * kChannels + c]);
                };
                const double top = at(ty.lo, tx.lo) * (1.0 - tx.frac) + at(ty.lo, tx.hi) * tx.frac;
                const double bot = at(ty.hi, tx.lo) * (1.0 - tx.frac) + at(ty.hi, tx.hi) * tx.frac;
                const double v = top * (1.0 - ty.frac) + bot * ty.frac;
                dst[(row * kTextureSide + col) * kChannels + c] =
                    static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
            }
        }
    }
    return Texture(std::move(out));
}

Pattern recover_pattern(const Texture& texture, const ErConfig& cfg) {
    cfg.validate();
    Pattern out(cfg.pattern_exponent);
    const std::size_t side = out.side();
    for (std::size_t row = 0; row < side; ++row) {
        for (std::size_t col = 0; col < side; ++col) {
            out.set_pixel(row, col,
                          texture.pixel(row << cfg.enlarge_exponent, col << cfg.enlarge_exponent));
        }
    }
    return out;
}

}  // namespace mosaic
