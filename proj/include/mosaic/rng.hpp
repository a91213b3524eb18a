#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mosaic {

/**
 * Seeded random stream with portable, fully specified draws.
 *
 * The standard distributions are implementation-defined, so draws are derived
 * directly from mt19937_64 output bits. State round-trips through a string,
 * which is how checkpoints persist it.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform over {0, ..., 255}.
    std::uint8_t uniform_byte() { return static_cast<std::uint8_t>(engine_() >> 56); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// +1 or -1 with probability 1/2 each.
    std::int8_t sign() { return (engine_() >> 63) != 0 ? std::int8_t{1} : std::int8_t{-1}; }

    [[nodiscard]] std::string save_state() const;
    void load_state(const std::string& state);

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::mt19937_64 engine_;
};

}  // namespace mosaic
