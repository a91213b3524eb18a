#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mosaic/codec.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/pattern.hpp"

namespace mosaic {

enum class OracleErrorKind {
    connection,     ///< transport failed or was closed
    protocol,       ///< peer sent something the protocol does not allow
    timeout,        ///< no reply within the deadline
    remote,         ///< peer answered with an error message
    invalid_query,  ///< query not supported by this oracle
};

[[nodiscard]] const char* to_string(OracleErrorKind kind) noexcept;

class OracleError : public std::runtime_error {
public:
    OracleError(OracleErrorKind kind, const std::string& message);

    [[nodiscard]] OracleErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] bool retryable() const noexcept { return kind_ != OracleErrorKind::invalid_query; }
    [[nodiscard]] std::optional<ContentHash> candidate() const noexcept { return candidate_; }

    /// Copy of this error tagged with the hash of the pattern being scored.
    [[nodiscard]] OracleError with_candidate(ContentHash hash) const;

private:
    OracleErrorKind kind_;
    std::optional<ContentHash> candidate_;
};

/**
 * What gets painted on the vehicle: either a pattern plus the ER settings that
 * expand it, or an already materialized texture (for example a bilinear one).
 */
class TextureSource {
public:
    static TextureSource from_pattern(Pattern pattern, ErConfig er);
    static TextureSource from_texture(Texture texture);

    /// Null for raw textures.
    [[nodiscard]] const Pattern* pattern() const noexcept;
    [[nodiscard]] const ErConfig* er() const noexcept;
    [[nodiscard]] Texture materialize() const;
    /// PNG of the materialized texture. ER sources are streamed row by row, so
    /// the 2048 x 2048 grid is never allocated.
    [[nodiscard]] std::vector<std::uint8_t> encode_png() const;
    [[nodiscard]] std::string label() const;

private:
    struct ErSource {
        Pattern pattern;
        ErConfig er;
    };
    explicit TextureSource(ErSource s) : source_(std::move(s)) {}
    explicit TextureSource(std::shared_ptr<const Texture> t) : source_(std::move(t)) {}

    std::variant<ErSource, std::shared_ptr<const Texture>> source_;
};

struct OracleQuery {
    TextureSource texture;
    std::vector<CameraTransform> transforms;
};

/**
 * Maps (texture, transforms) to one detection score in [0, 1] per transform.
 *
 * evaluate may be called concurrently from up to max_parallel() threads and must
 * be deterministic for identical queries.
 */
class Oracle {
public:
    virtual ~Oracle() = default;

    [[nodiscard]] virtual std::vector<double> evaluate(const OracleQuery& query) = 0;
    [[nodiscard]] virtual std::size_t max_parallel() const {
        return std::numeric_limits<std::size_t>::max();
    }
    [[nodiscard]] virtual std::string describe() const = 0;
};

/// Throws OracleError(protocol) unless there is one finite score in [0, 1] per transform.
void validate_response(const OracleQuery& query, const std::vector<double>& scores);

class ConstantOracle final : public Oracle {
public:
    explicit ConstantOracle(double score);
    std::vector<double> evaluate(const OracleQuery& query) override;
    std::string describe() const override;

private:
    double score_;
};

/**
 * Synthetic objective with a hidden optimum x*: per transform t,
 *   score_t = clamp01(mean_channels |x - x*| / 255 + b_t)
 * with a fixed offset b_t in [-amplitude, amplitude] derived from seed and transform.
 */
class PlantedWeaknessOracle final : public Oracle {
public:
    static constexpr double kDefaultOffsetAmplitude = 0.02;

    PlantedWeaknessOracle(std::uint64_t seed, int pattern_exponent,
                          double offset_amplitude = kDefaultOffsetAmplitude);

    std::vector<double> evaluate(const OracleQuery& query) override;
    std::string describe() const override;

    [[nodiscard]] const Pattern& target() const noexcept { return target_; }
    [[nodiscard]] double offset(const CameraTransform& t) const noexcept;
    /// Mean normalized L1 distance to the target, before offsets.
    [[nodiscard]] double distance(const Pattern& x) const;

private:
    std::uint64_t seed_;
    double amplitude_;
    Pattern target_;
};

/// Dominant aligned uniform-block side and mean neighbor-block contrast in [0, 1].
struct MosaicStats {
    std::size_t block_side{1};
    double contrast{0.0};
};

[[nodiscard]] MosaicStats mosaic_stats(const TextureSource& source);
/// Generic path: texture scanned pixel by pixel.
[[nodiscard]] MosaicStats mosaic_stats(const Texture& texture);

/**
 * Rewards mid-frequency, high-contrast mosaics:
 *   score = 1 - g(block_side) * contrast,
 *   g(b) = exp(-(log2 b - preferred_e)^2 / (2 sigma^2)).
 * The same score is returned for every transform.
 */
class FrequencyPreferenceOracle final : public Oracle {
public:
    static constexpr double kDefaultSigma = 1.0;

    FrequencyPreferenceOracle(std::uint64_t seed, int preferred_e, double sigma = kDefaultSigma);

    std::vector<double> evaluate(const OracleQuery& query) override;
    std::string describe() const override;

    [[nodiscard]] double gain(std::size_t block_side) const noexcept;
    [[nodiscard]] double score(const MosaicStats& stats) const noexcept;

private:
    std::uint64_t seed_;
    int preferred_e_;
    double sigma_;
};

}  // namespace mosaic
