#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/oracle.hpp"
#include "mosaic/search.hpp"

namespace mosaic {

/// Environment variable consulted when a remote oracle spec carries no address.
inline constexpr const char* kOracleAddressEnv = "MOSAIC_ORACLE_ADDR";

/**
 * Oracle selection, written as
 *   constant:<c>  planted:<seed>  frequency:<seed>:<preferred_e>  remote[:<host>:<port>]
 */
struct OracleSpec {
    enum class Kind { constant, planted, frequency, remote };

    Kind kind{Kind::planted};
    double constant{0.5};
    std::uint64_t seed{0};
    int preferred_e{5};
    std::string address;  ///< remote only; empty means use kOracleAddressEnv

    [[nodiscard]] static OracleSpec parse(const std::string& text);
    [[nodiscard]] std::string to_string() const;
};

/// Builds the oracle. The planted oracle takes its pattern size from `er`.
[[nodiscard]] std::unique_ptr<Oracle> make_oracle(const OracleSpec& spec, const ErConfig& er);

enum class RenderMode { er, bilinear };
[[nodiscard]] RenderMode parse_render_mode(const std::string& name);
[[nodiscard]] const char* to_string(RenderMode mode) noexcept;

struct RunConfig {
    SearchConfig search;
    ErConfig er;
    OracleSpec oracle;
    /// Unset means the command default: training for search, testing for the rest.
    std::optional<TransformSet> transforms;
    std::filesystem::path out_dir{"run"};
    std::optional<std::filesystem::path> resume_from;

    /// Validates nested configs; with `need_out_dir`, also creates out_dir and
    /// checks it is writable.
    void validate(bool need_out_dir) const;
};

[[nodiscard]] nlohmann::json to_json(const RunConfig& cfg);
/// Throws std::invalid_argument on unknown keys or bad values.
[[nodiscard]] RunConfig run_config_from_json(const nlohmann::json& j);
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitOracle = 3;
inline constexpr int kExitIo = 4;

/// Search run; writes the pool, textures, trace log, checkpoints, testing-grid
/// report and summary into out_dir.
int cmd_search(const RunConfig& cfg, std::ostream& log);

/// Scores n random patterns (drawn as for search initialization) and writes
/// baseline.json with per-candidate rows and mean S_avg / P_0.5.
int cmd_baseline_random(const RunConfig& cfg, int n, RenderMode mode, std::ostream& log);

/// Writes the 2048 x 2048 texture built from a pattern PNG.
int cmd_render(const std::filesystem::path& pattern_path, const ErConfig& er, RenderMode mode,
               const std::filesystem::path& out_path, std::ostream& log);

enum class InputKind { pattern, texture };

/// Scores one pattern or texture and prints the report document to `out`.
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& input, InputKind kind,
             RenderMode mode, std::ostream& out, std::ostream& log);

/// Full command line front end; argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mosaic
