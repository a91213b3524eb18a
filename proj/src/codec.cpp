#include "mosaic/codec.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cstdio>

namespace mosaic {

ContentHash content_hash(const Pattern& pattern) {
    std::vector<std::uint8_t> message;
    message.reserve(pattern.channels().size() + 1);
    message.push_back(static_cast<std::uint8_t>(pattern.exponent()));
    message.insert(message.end(), pattern.channels().begin(), pattern.channels().end());
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    if (EVP_Digest(message.data(), message.size(), digest, &digest_len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    ContentHash h = 0;
    for (int i = 0; i < 8; ++i) {
        h = (h << 8) | digest[i];
    }
    return h;
}

std::string hash_hex(ContentHash hash) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

ContentHash parse_hash_hex(std::string_view hex) {
    ContentHash h = 0;
    const auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), h, 16);
    if (ec != std::errc{} || ptr != hex.data() + hex.size() || hex.size() != 16) {
        throw std::invalid_argument("bad content hash '" + std::string(hex) + "'");
    }
    return h;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw std::invalid_argument("base64 length not a multiple of 4");
    }
    std::vector<std::uint8_t> out(3 * (text.size() / 4));
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) {
        throw std::invalid_argument("malformed base64");
    }
    // EVP_DecodeBlock keeps the zero bytes that padding stands for.
    std::size_t len = static_cast<std::size_t>(n);
    if (!text.empty() && text.back() == '=') --len;
    if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

}  // namespace mosaic
