#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mosaic/codec.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/oracle.hpp"
#include "mosaic/pattern.hpp"
#include "mosaic/rng.hpp"

namespace mosaic {

/// Search hyperparameters. Defaults are the published settings; the global
/// step count is not published and mirrors the mutation count.
struct SearchConfig {
    int init_count{100};         ///< random candidates scored before the first loop
    int pool_size{20};           ///< solid pool capacity
    int start_count{5};          ///< pool members used as inner-search starting points
    int mutations_per_step{20};  ///< mutants per inner iteration
    int inner_iterations{3};
    int outer_loops{5};
    int global_steps{20};        ///< undirected mutants per pool member per outer loop
    double eps_inner{5.0};       ///< inner mutation radius, channel units
    double eps_global{10.0};     ///< global exploration radius, channel units
    std::uint64_t seed{0};
    int parallelism{1};          ///< concurrent oracle queries per batch
    int oracle_retries{0};       ///< extra attempts for retryable oracle failures

    /// Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
    /// N_c + n_r * (N_a * n_d * n_w + N_s * n_g)
    [[nodiscard]] std::uint64_t planned_queries() const;

    friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

void to_json(nlohmann::json& j, const SearchConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SearchConfig& cfg);

enum class Phase { init, scatter, directed, global };
[[nodiscard]] const char* to_string(Phase phase) noexcept;
[[nodiscard]] Phase parse_phase(const std::string& name);

/// A scored pattern. The score is fixed at construction.
class Candidate {
public:
    Candidate(Pattern pattern, double score, std::uint64_t id);
    Candidate(Pattern pattern, double score, std::uint64_t id, ContentHash hash);

    [[nodiscard]] const Pattern& pattern() const noexcept { return pattern_; }
    [[nodiscard]] double score() const noexcept { return score_; }
    [[nodiscard]] std::uint64_t id() const noexcept { return id_; }
    [[nodiscard]] ContentHash hash() const noexcept { return hash_; }

    friend bool operator==(const Candidate&, const Candidate&) = default;

private:
    Pattern pattern_;
    double score_;
    std::uint64_t id_;
    ContentHash hash_;
};

/// Ranking order: lower score first, then older (smaller id) first.
[[nodiscard]] bool ranks_before(const Candidate& a, const Candidate& b) noexcept;

/// Per pixel-channel step direction over {-1, 0, +1}, same layout as Pattern channels.
class Direction {
public:
    Direction(int side_exponent, std::vector<std::int8_t> entries);

    [[nodiscard]] int exponent() const noexcept { return exponent_; }
    [[nodiscard]] std::span<const std::int8_t> entries() const noexcept { return entries_; }

    friend bool operator==(const Direction&, const Direction&) = default;

private:
    int exponent_;
    std::vector<std::int8_t> entries_;
};

/// Elite set: at most `capacity` candidates, ranked, no duplicate content.
class SolidPool {
public:
    explicit SolidPool(std::size_t capacity);

    /// Adds candidates whose content is new to the pool, re-ranks and truncates.
    void merge(std::span<const Candidate> incoming);

    [[nodiscard]] std::span<const Candidate> members() const noexcept { return members_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] std::size_t size() const noexcept { return members_.size(); }
    [[nodiscard]] bool empty() const noexcept { return members_.empty(); }
    /// Throws std::logic_error on an empty pool.
    [[nodiscard]] const Candidate& best() const;
    [[nodiscard]] std::vector<Candidate> top(std::size_t n) const;

    friend bool operator==(const SolidPool&, const SolidPool&) = default;

private:
    std::size_t capacity_;
    std::vector<Candidate> members_;
};

struct QueryRecord {
    std::uint64_t index{0};
    ContentHash hash{0};
    double score{0.0};
    Phase phase{Phase::init};
    bool cached{false};  ///< answered from the score cache, no oracle call

    friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct SearchTrace {
    std::vector<QueryRecord> queries;
    std::vector<double> pool_best;  ///< best pool score after every pool update

    friend bool operator==(const SearchTrace&, const SearchTrace&) = default;
};

[[nodiscard]] nlohmann::json to_json(const QueryRecord& record);
[[nodiscard]] QueryRecord query_record_from_json(const nlohmann::json& j);

/// Evaluation bookkeeping shared by every phase of one run.
struct ScoreBook {
    std::map<ContentHash, double> cache;
    std::uint64_t next_id{0};
    std::uint64_t oracle_calls{0};
    std::uint64_t cache_hits{0};
    SearchTrace trace;

    friend bool operator==(const ScoreBook&, const ScoreBook&) = default;
};

/**
 * Scores batches of patterns through an oracle.
 *
 * Identical content is answered from the cache. Cache misses of one batch are
 * dispatched on up to `parallelism` threads; results are consumed in batch
 * order, so ids, trace records and failures do not depend on completion order.
 */
class ScoringSession {
public:
    using RecordSink = std::function<void(const QueryRecord&)>;

    ScoringSession(Oracle& oracle, ErConfig er, std::vector<CameraTransform> transforms,
                   int parallelism, int retries, ScoreBook& book, RecordSink sink = {});

    /// Scores every pattern (candidate score = mean over transforms). If any oracle
    /// call fails, nothing is recorded and the lowest-index failure is rethrown
    /// tagged with that pattern's hash.
    std::vector<Candidate> score(std::vector<Pattern> patterns, Phase phase);

    [[nodiscard]] const ScoreBook& book() const noexcept { return book_; }

private:
    double query_oracle(const Pattern& pattern);

    Oracle& oracle_;
    ErConfig er_;
    std::vector<CameraTransform> transforms_;
    std::size_t parallelism_;
    int retries_;
    ScoreBook& book_;
    RecordSink sink_;
};

// Mutation primitives ---------------------------------------------------------

/// Every channel uniform over {0, ..., 255}.
[[nodiscard]] Pattern random_pattern(Rng& rng, int side_exponent);

/// Round half away from zero, then clamp to [0, 255].
[[nodiscard]] std::uint8_t clip(double v) noexcept;

/// x' = clip(x + u * eps * d) per channel, u ~ U[0, 1) drawn for every channel.
[[nodiscard]] Pattern mutate_scatter(const Pattern& pattern, const Direction& delta, double eps,
                                     Rng& rng);
[[nodiscard]] Pattern mutate_scatter(const Candidate& c, const Direction& delta, double eps,
                                     Rng& rng);

/// sign(best_mutant - current) per channel, sign(0) = 0. Throws ShapeMismatch.
[[nodiscard]] Direction directed_delta(const Pattern& current, const Pattern& best_mutant);
[[nodiscard]] Direction directed_delta(const Candidate& current, const Candidate& best_mutant);

/// Independent +-1 entries, no zeros.
[[nodiscard]] Direction random_delta(Rng& rng, int side_exponent);

// Search phases -----------------------------------------------------------------

struct InnerResult {
    Candidate best;                    ///< never scores worse than the start
    std::vector<Candidate> evaluated;  ///< every mutant scored along the way
};

/// n_d iterations of n_w mutants along the current direction. A strictly better
/// best mutant is adopted and its step sign becomes the direction; otherwise the
/// direction is redrawn at random.
[[nodiscard]] InnerResult inner_search(const Candidate& start, const SearchConfig& cfg,
                                       ScoringSession& session, Rng& rng);

/// n_g undirected eps_global mutants per pool member (fresh +-1 direction each),
/// then re-ranks the pool over old members and mutants.
[[nodiscard]] SolidPool global_explore(const SolidPool& pool, const SearchConfig& cfg,
                                       ScoringSession& session, Rng& rng);

// Full run ----------------------------------------------------------------------

/// Everything needed to continue a run exactly from an outer-loop boundary.
struct Checkpoint {
    static constexpr int kVersion = 1;

    SearchConfig cfg;
    ErConfig er;
    std::vector<CameraTransform> transforms;
    bool initialized{false};  ///< initial pool seeded
    int completed_loops{0};
    std::string rng_state;
    SolidPool pool{0};
    ScoreBook book;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

[[nodiscard]] nlohmann::json to_json(const Checkpoint& cp);
/// Throws std::invalid_argument on a wrong format tag, version or malformed content.
[[nodiscard]] Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const Checkpoint& cp);
[[nodiscard]] Checkpoint load_checkpoint(const std::string& path);

struct SearchOptions {
    /// Scoring transforms; empty means the training grid.
    std::vector<CameraTransform> transforms;
    /// Called at every outer-loop boundary, and with the last boundary when the
    /// oracle fails after at least one successful query.
    std::function<void(const Checkpoint&)> on_checkpoint;
    ScoringSession::RecordSink on_query;
};

/// Raised when the oracle fails mid-run. The cause keeps the failing candidate hash.
class SearchAborted : public std::runtime_error {
public:
    SearchAborted(const OracleError& cause, bool checkpoint_written);

    [[nodiscard]] const OracleError& cause() const noexcept { return cause_; }
    [[nodiscard]] bool checkpoint_written() const noexcept { return checkpoint_written_; }

private:
    OracleError cause_;
    bool checkpoint_written_;
};

struct SearchResult {
    SolidPool pool{0};
    SearchTrace trace;
    std::uint64_t planned_queries{0};
    std::uint64_t oracle_calls{0};
    std::uint64_t cache_hits{0};

    [[nodiscard]] double initial_best() const { return trace.pool_best.front(); }
};

/// Runs the elite-pool discrete search. Configs are validated before any query.
[[nodiscard]] SearchResult run_search(const SearchConfig& cfg, const ErConfig& er, Oracle& oracle,
                                      const SearchOptions& options = {});

/// Continues from a checkpoint; the outcome equals the uninterrupted run.
/// options.transforms is ignored in favor of the checkpoint's.
[[nodiscard]] SearchResult resume_search(const Checkpoint& checkpoint, Oracle& oracle,
                                         const SearchOptions& options = {});

/// Canonical text of a pool (hashes, ids, scores, pixels) and of a trace, for
/// byte comparisons between runs.
[[nodiscard]] std::string serialize_pool(const SolidPool& pool);
[[nodiscard]] std::string serialize_trace(const SearchTrace& trace);

}  // namespace mosaic
