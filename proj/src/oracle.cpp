#include "mosaic/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "mosaic/png_io.hpp"
#include "mosaic/rng.hpp"
#include "mosaic/texture_lab.hpp"

namespace mosaic {

const char* to_string(OracleErrorKind kind) noexcept {
    switch (kind) {
        case OracleErrorKind::connection: return "connection";
        case OracleErrorKind::protocol: return "protocol";
        case OracleErrorKind::timeout: return "timeout";
        case OracleErrorKind::remote: return "remote";
        case OracleErrorKind::invalid_query: return "invalid_query";
    }
    return "unknown";
}

OracleError::OracleError(OracleErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

OracleError OracleError::with_candidate(ContentHash hash) const {
    OracleError e = *this;
    e.candidate_ = hash;
    return e;
}

TextureSource TextureSource::from_pattern(Pattern pattern, ErConfig er) {
    er.validate();
    if (pattern.exponent() != er.pattern_exponent) {
        throw ConfigMismatch("pattern exponent " + std::to_string(pattern.exponent()) +
                             " does not match " + er.label());
    }
    return TextureSource(ErSource{std::move(pattern), er});
}

TextureSource TextureSource::from_texture(Texture texture) {
    return TextureSource(std::make_shared<const Texture>(std::move(texture)));
}

const Pattern* TextureSource::pattern() const noexcept {
    const auto* s = std::get_if<ErSource>(&source_);
    return s != nullptr ? &s->pattern : nullptr;
}

const ErConfig* TextureSource::er() const noexcept {
    const auto* s = std::get_if<ErSource>(&source_);
    return s != nullptr ? &s->er : nullptr;
}

Texture TextureSource::materialize() const {
    if (const auto* s = std::get_if<ErSource>(&source_)) {
        return er_construct(s->pattern, s->er);
    }
    return *std::get<std::shared_ptr<const Texture>>(source_);
}

std::vector<std::uint8_t> TextureSource::encode_png() const {
    if (const auto* s = std::get_if<ErSource>(&source_)) {
        std::vector<std::uint8_t> line(kTextureSide * kChannels);
        std::size_t built = SIZE_MAX;
        const std::size_t block_mask = ~((std::size_t{1} << s->er.enlarge_exponent) - 1);
        return encode_png_rows(kTextureSide, [&](std::size_t row) {
            // Rows repeat within each 2^e block; rebuild only when the block changes.
            if ((row & block_mask) != built) {
                er_row(s->pattern, s->er, row, line);
                built = row & block_mask;
            }
            return line.data();
        });
    }
    return mosaic::encode_png(*std::get<std::shared_ptr<const Texture>>(source_));
}

std::string TextureSource::label() const {
    if (const auto* s = std::get_if<ErSource>(&source_)) {
        return s->er.label();
    }
    return "texture";
}

void validate_response(const OracleQuery& query, const std::vector<double>& scores) {
    if (scores.size() != query.transforms.size()) {
        throw OracleError(OracleErrorKind::protocol,
                          "expected " + std::to_string(query.transforms.size()) + " scores, got " +
                              std::to_string(scores.size()));
    }
    for (double s : scores) {
        if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
            throw OracleError(OracleErrorKind::protocol, "score outside [0, 1]");
        }
    }
}

// ---------------------------------------------------------------------------

ConstantOracle::ConstantOracle(double score) : score_(score) {
    if (!(score >= 0.0 && score <= 1.0)) {
        throw std::invalid_argument("constant oracle score must lie in [0, 1]");
    }
}

std::vector<double> ConstantOracle::evaluate(const OracleQuery& query) {
    return std::vector<double>(query.transforms.size(), score_);
}

std::string ConstantOracle::describe() const {
    std::ostringstream os;
    os << "constant:" << score_;
    return os.str();
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Pattern draw_target(std::uint64_t seed, int exponent) {
    // Separate stream from any search RNG seeded with the same number.
    Rng rng(splitmix64(seed ^ 0x706c616e746564ULL));
    Pattern p(exponent);
    for (auto& c : p.channels()) {
        c = rng.uniform_byte();
    }
    return p;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

PlantedWeaknessOracle::PlantedWeaknessOracle(std::uint64_t seed, int pattern_exponent,
                                             double offset_amplitude)
    : seed_(seed), amplitude_(offset_amplitude), target_(draw_target(seed, pattern_exponent)) {
    if (!(offset_amplitude >= 0.0 && offset_amplitude <= 0.5)) {
        throw std::invalid_argument("offset amplitude must lie in [0, 0.5]");
    }
}

double PlantedWeaknessOracle::offset(const CameraTransform& t) const noexcept {
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(t.distance_m()));
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(t.azimuth_deg()));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return amplitude_ * (2.0 * u - 1.0);
}

double PlantedWeaknessOracle::distance(const Pattern& x) const {
    if (x.exponent() != target_.exponent()) {
        throw OracleError(OracleErrorKind::invalid_query,
                          "planted oracle built for exponent " + std::to_string(target_.exponent()) +
                              ", got " + std::to_string(x.exponent()));
    }
    auto a = x.channels();
    auto b = target_.channels();
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += static_cast<std::uint64_t>(std::abs(int{a[i]} - int{b[i]}));
    }
    return static_cast<double>(total) / (255.0 * static_cast<double>(a.size()));
}

std::vector<double> PlantedWeaknessOracle::evaluate(const OracleQuery& query) {
    const Pattern* pattern = query.texture.pattern();
    if (pattern == nullptr) {
        throw OracleError(OracleErrorKind::invalid_query,
                          "planted oracle needs a pattern, not a raw texture");
    }
    const double d = distance(*pattern);
    std::vector<double> out;
    out.reserve(query.transforms.size());
    for (const auto& t : query.transforms) {
        out.push_back(clamp01(d + offset(t)));
    }
    return out;
}

std::string PlantedWeaknessOracle::describe() const {
    return "planted:" + std::to_string(seed_) + " (p=" + std::to_string(target_.exponent()) + ")";
}

// ---------------------------------------------------------------------------

namespace {

/// Collapses 2x2 aligned uniform cells while possible; returns the block grid
/// and how many grid pixels one block spans.
std::pair<Pattern, std::size_t> collapse_blocks(Pattern grid) {
    std::size_t factor = 1;
    while (grid.side() > 1) {
        const std::size_t half = grid.side() / 2;
        bool uniform = true;
        for (std::size_t r = 0; r < half && uniform; ++r) {
            for (std::size_t c = 0; c < half; ++c) {
                const Rgb v = grid.pixel(2 * r, 2 * c);
                if (grid.pixel(2 * r, 2 * c + 1) != v || grid.pixel(2 * r + 1, 2 * c) != v ||
                    grid.pixel(2 * r + 1, 2 * c + 1) != v) {
                    uniform = false;
                    break;
                }
            }
        }
        if (!uniform) {
            break;
        }
        Pattern next(grid.exponent() - 1);
        for (std::size_t r = 0; r < half; ++r) {
            for (std::size_t c = 0; c < half; ++c) {
                next.set_pixel(r, c, grid.pixel(2 * r, 2 * c));
            }
        }
        grid = std::move(next);
        factor *= 2;
    }
    return {std::move(grid), factor};
}

double neighbor_contrast(const Pattern& blocks) {
    const std::size_t n = blocks.side();
    if (n < 2) {
        return 0.0;
    }
    auto ch = blocks.channels();
    auto diff = [&](std::size_t a, std::size_t b) {
        std::uint32_t s = 0;
        for (std::size_t k = 0; k < kChannels; ++k) {
            s += static_cast<std::uint32_t>(std::abs(int{ch[a * kChannels + k]} - int{ch[b * kChannels + k]}));
        }
        return s;
    };
    std::uint64_t total = 0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t i = r * n + c;
            if (c + 1 < n) total += diff(i, i + 1);
            if (r + 1 < n) total += diff(i, i + n);
        }
    }
    const double pairs = 2.0 * static_cast<double>(n) * static_cast<double>(n - 1);
    return static_cast<double>(total) / (pairs * kChannels * 255.0);
}

MosaicStats stats_of(Pattern grid, std::size_t base_block) {
    auto [blocks, factor] = collapse_blocks(std::move(grid));
    return {base_block * factor, neighbor_contrast(blocks)};
}

}  // namespace

MosaicStats mosaic_stats(const Texture& texture) { return stats_of(texture.grid(), 1); }

MosaicStats mosaic_stats(const TextureSource& source) {
    if (const Pattern* p = source.pattern()) {
        // The ER texture is the tiled pattern with each pixel blown up to 2^e.
        const ErConfig& er = *source.er();
        return stats_of(repeat(*p, er.repeat_exponent), std::size_t{1} << er.enlarge_exponent);
    }
    return mosaic_stats(source.materialize());
}

FrequencyPreferenceOracle::FrequencyPreferenceOracle(std::uint64_t seed, int preferred_e,
                                                     double sigma)
    : seed_(seed), preferred_e_(preferred_e), sigma_(sigma) {
    if (preferred_e < 0 || preferred_e > kTextureExponent) {
        throw std::invalid_argument("preferred block exponent must lie in [0, 11]");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("sigma must be positive");
    }
}

double FrequencyPreferenceOracle::gain(std::size_t block_side) const noexcept {
    const double d = std::log2(static_cast<double>(block_side)) - preferred_e_;
    return std::exp(-d * d / (2.0 * sigma_ * sigma_));
}

double FrequencyPreferenceOracle::score(const MosaicStats& stats) const noexcept {
    return clamp01(1.0 - gain(stats.block_side) * stats.contrast);
}

std::vector<double> FrequencyPreferenceOracle::evaluate(const OracleQuery& query) {
    const double s = score(mosaic_stats(query.texture));
    return std::vector<double>(query.transforms.size(), s);
}

std::string FrequencyPreferenceOracle::describe() const {
    return "frequency:" + std::to_string(seed_) + ":" + std::to_string(preferred_e_);
}

}  // namespace mosaic
