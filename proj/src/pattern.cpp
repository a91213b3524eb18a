#include "mosaic/pattern.hpp"

#include <regex>

namespace mosaic {

namespace {

void check_exponent(int side_exponent) {
    if (side_exponent < 0 || side_exponent > kTextureExponent) {
        throw ExponentOverflow("pattern side exponent " + std::to_string(side_exponent) +
                               " outside [0, 11]");
    }
}

std::size_t channel_count_for(int side_exponent) {
    const std::size_t side = std::size_t{1} << side_exponent;
    return side * side * kChannels;
}

}  // namespace

Pattern::Pattern(int side_exponent) : exponent_(side_exponent) {
    check_exponent(side_exponent);
    channels_.assign(channel_count_for(side_exponent), 0);
}

Pattern::Pattern(int side_exponent, std::vector<std::uint8_t> channels)
    : exponent_(side_exponent), channels_(std::move(channels)) {
    check_exponent(side_exponent);
    if (channels_.size() != channel_count_for(side_exponent)) {
        throw ShapeMismatch("pattern of exponent " + std::to_string(side_exponent) + " needs " +
                            std::to_string(channel_count_for(side_exponent)) + " channels, got " +
                            std::to_string(channels_.size()));
    }
}

Pattern uniform_pattern(int side_exponent, Rgb color) {
    Pattern out(side_exponent);
    auto ch = out.channels();
    for (std::size_t i = 0; i < ch.size(); i += kChannels) {
        ch[i] = color.r;
        ch[i + 1] = color.g;
        ch[i + 2] = color.b;
    }
    return out;
}

Texture::Texture() : grid_(kTextureExponent) {}

Texture::Texture(Pattern full) : grid_(std::move(full)) {
    if (grid_.exponent() != kTextureExponent) {
        throw ShapeMismatch("texture must be 2048x2048, got side " + std::to_string(grid_.side()));
    }
}

void ErConfig::validate() const {
    if (pattern_exponent < 0 || enlarge_exponent < 0 || repeat_exponent < 0) {
        throw ConfigMismatch("ER exponents must be non-negative");
    }
    if (pattern_exponent + enlarge_exponent + repeat_exponent != kTextureExponent) {
        throw ConfigMismatch("ER exponents must satisfy p + e + r = 11, got p=" +
                             std::to_string(pattern_exponent) + " e=" +
                             std::to_string(enlarge_exponent) + " r=" +
                             std::to_string(repeat_exponent));
    }
}

std::string ErConfig::label() const {
    return "E" + std::to_string(enlarge_exponent) + "-R" + std::to_string(repeat_exponent);
}

ErConfig ErConfig::from_label(const std::string& label) {
    static const std::regex re(R"(^[Ee](\d{1,2})-[Rr](\d{1,2})$)");
    std::smatch m;
    if (!std::regex_match(label, m, re)) {
        throw ConfigMismatch("bad ER label '" + label + "', expected E<e>-R<r>");
    }
    ErConfig cfg;
    cfg.enlarge_exponent = std::stoi(m[1].str());
    cfg.repeat_exponent = std::stoi(m[2].str());
    cfg.pattern_exponent = kTextureExponent - cfg.enlarge_exponent - cfg.repeat_exponent;
    cfg.validate();
    return cfg;
}

}  // namespace mosaic
