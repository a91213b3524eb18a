#include "mosaic/search.hpp"

#include "mosaic/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mosaic {

// SearchConfig ------------------------------------------------------------------

void SearchConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("search config: " + what); };
    if (init_count < 1 || pool_size < 1 || start_count < 1 || mutations_per_step < 1 ||
        inner_iterations < 1 || outer_loops < 1) {
        fail("all counts must be >= 1");
    }
    if (global_steps < 0) fail("global_steps must be >= 0");
    if (start_count >= pool_size) fail("start_count must be smaller than pool_size");
    if (pool_size > init_count) fail("pool_size must not exceed init_count");
    if (!(eps_inner > 0.0) || !(eps_inner <= eps_global) || !(eps_global <= 255.0)) {
        fail("radii must satisfy 0 < eps_inner <= eps_global <= 255");
    }
    if (parallelism < 1) fail("parallelism must be >= 1");
    if (oracle_retries < 0) fail("oracle_retries must be >= 0");
}

std::uint64_t SearchConfig::planned_queries() const {
    const auto u = [](int v) { return static_cast<std::uint64_t>(v); };
    return u(init_count) +
           u(outer_loops) * (u(start_count) * u(inner_iterations) * u(mutations_per_step) +
                             u(pool_size) * u(global_steps));
}

void to_json(nlohmann::json& j, const SearchConfig& c) {
    j = {{"init_count", c.init_count},
         {"pool_size", c.pool_size},
         {"start_count", c.start_count},
         {"mutations_per_step", c.mutations_per_step},
         {"inner_iterations", c.inner_iterations},
         {"outer_loops", c.outer_loops},
         {"global_steps", c.global_steps},
         {"eps_inner", c.eps_inner},
         {"eps_global", c.eps_global},
         {"seed", c.seed},
         {"parallelism", c.parallelism},
         {"oracle_retries", c.oracle_retries}};
}

void from_json(const nlohmann::json& j, SearchConfig& c) {
    if (!j.is_object()) {
        throw std::invalid_argument("search config must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "init_count") c.init_count = value.get<int>();
        else if (key == "pool_size") c.pool_size = value.get<int>();
        else if (key == "start_count") c.start_count = value.get<int>();
        else if (key == "mutations_per_step") c.mutations_per_step = value.get<int>();
        else if (key == "inner_iterations") c.inner_iterations = value.get<int>();
        else if (key == "outer_loops") c.outer_loops = value.get<int>();
        else if (key == "global_steps") c.global_steps = value.get<int>();
        else if (key == "eps_inner") c.eps_inner = value.get<double>();
        else if (key == "eps_global") c.eps_global = value.get<double>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "parallelism") c.parallelism = value.get<int>();
        else if (key == "oracle_retries") c.oracle_retries = value.get<int>();
        else throw std::invalid_argument("unknown search config key '" + key + "'");
    }
}

const char* to_string(Phase phase) noexcept {
    switch (phase) {
        case Phase::init: return "init";
        case Phase::scatter: return "scatter";
        case Phase::directed: return "directed";
        case Phase::global: return "global";
    }
    return "unknown";
}

Phase parse_phase(const std::string& name) {
    for (Phase p : {Phase::init, Phase::scatter, Phase::directed, Phase::global}) {
        if (name == to_string(p)) return p;
    }
    throw std::invalid_argument("unknown phase '" + name + "'");
}

// Candidate / Direction / SolidPool -----------------------------------------------

Candidate::Candidate(Pattern pattern, double score, std::uint64_t id)
    : pattern_(std::move(pattern)), score_(score), id_(id), hash_(content_hash(pattern_)) {}

Candidate::Candidate(Pattern pattern, double score, std::uint64_t id, ContentHash hash)
    : pattern_(std::move(pattern)), score_(score), id_(id), hash_(hash) {}

bool ranks_before(const Candidate& a, const Candidate& b) noexcept {
    if (a.score() != b.score()) return a.score() < b.score();
    return a.id() < b.id();
}

Direction::Direction(int side_exponent, std::vector<std::int8_t> entries)
    : exponent_(side_exponent), entries_(std::move(entries)) {
    const std::size_t side = std::size_t{1} << side_exponent;
    if (entries_.size() != side * side * kChannels) {
        throw ShapeMismatch("direction size does not match exponent " + std::to_string(side_exponent));
    }
    for (auto e : entries_) {
        if (e < -1 || e > 1) {
            throw std::invalid_argument("direction entries must lie in {-1, 0, +1}");
        }
    }
}

SolidPool::SolidPool(std::size_t capacity) : capacity_(capacity) {}

void SolidPool::merge(std::span<const Candidate> incoming) {
    std::unordered_set<ContentHash> seen;
    for (const auto& m : members_) seen.insert(m.hash());
    for (const auto& c : incoming) {
        if (seen.insert(c.hash()).second) {
            members_.push_back(c);
        }
    }
    std::sort(members_.begin(), members_.end(), ranks_before);
    if (members_.size() > capacity_) {
        members_.erase(members_.begin() + static_cast<std::ptrdiff_t>(capacity_), members_.end());
    }
}

const Candidate& SolidPool::best() const {
    if (members_.empty()) {
        throw std::logic_error("best() on an empty pool");
    }
    return members_.front();
}

std::vector<Candidate> SolidPool::top(std::size_t n) const {
    const auto k = std::min(n, members_.size());
    return {members_.begin(), members_.begin() + static_cast<std::ptrdiff_t>(k)};
}

// Trace records -------------------------------------------------------------------

nlohmann::json to_json(const QueryRecord& r) {
    return {{"index", r.index},
            {"hash", hash_hex(r.hash)},
            {"score", r.score},
            {"phase", to_string(r.phase)},
            {"cached", r.cached}};
}

QueryRecord query_record_from_json(const nlohmann::json& j) {
    QueryRecord r;
    r.index = j.at("index").get<std::uint64_t>();
    r.hash = parse_hash_hex(j.at("hash").get<std::string>());
    r.score = j.at("score").get<double>();
    r.phase = parse_phase(j.at("phase").get<std::string>());
    r.cached = j.at("cached").get<bool>();
    return r;
}

// ScoringSession ----------------------------------------------------------------

ScoringSession::ScoringSession(Oracle& oracle, ErConfig er, std::vector<CameraTransform> transforms,
                               int parallelism, int retries, ScoreBook& book, RecordSink sink)
    : oracle_(oracle),
      er_(er),
      transforms_(std::move(transforms)),
      parallelism_(static_cast<std::size_t>(std::max(parallelism, 1))),
      retries_(std::max(retries, 0)),
      book_(book),
      sink_(std::move(sink)) {
    er_.validate();
    if (transforms_.empty()) {
        throw std::invalid_argument("scoring needs at least one camera transform");
    }
    parallelism_ = std::min(parallelism_, std::max<std::size_t>(oracle_.max_parallel(), 1));
}

double ScoringSession::query_oracle(const Pattern& pattern) {
    OracleQuery query{TextureSource::from_pattern(pattern, er_), transforms_};
    for (int attempt = 0;; ++attempt) {
        try {
            auto scores = oracle_.evaluate(query);
            validate_response(query, scores);
            return std::accumulate(scores.begin(), scores.end(), 0.0) /
                   static_cast<double>(scores.size());
        } catch (const OracleError& e) {
            if (!e.retryable() || attempt >= retries_) {
                throw;
            }
        }
    }
}

std::vector<Candidate> ScoringSession::score(std::vector<Pattern> patterns, Phase phase) {
    const std::size_t n = patterns.size();
    std::vector<ContentHash> hashes(n);
    for (std::size_t i = 0; i < n; ++i) hashes[i] = content_hash(patterns[i]);

    // Decide hits and misses in batch order; a repeat within the batch is a hit.
    std::vector<std::size_t> misses;
    std::unordered_map<ContentHash, std::size_t> first_miss;
    std::vector<bool> cached(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (book_.cache.count(hashes[i]) != 0 || first_miss.count(hashes[i]) != 0) {
            cached[i] = true;
        } else {
            first_miss.emplace(hashes[i], misses.size());
            misses.push_back(i);
        }
    }

    std::vector<double> miss_scores(misses.size(), 0.0);
    std::vector<std::exception_ptr> miss_errors(misses.size());
    auto work = [&](std::size_t k) {
        try {
            miss_scores[k] = query_oracle(patterns[misses[k]]);
        } catch (...) {
            miss_errors[k] = std::current_exception();
        }
    };
    parallel_for(misses.size(), parallelism_, work);

    for (std::size_t k = 0; k < misses.size(); ++k) {
        if (!miss_errors[k]) continue;
        try {
            std::rethrow_exception(miss_errors[k]);
        } catch (const OracleError& e) {
            throw e.with_candidate(hashes[misses[k]]);
        } catch (const std::exception& e) {
            throw OracleError(OracleErrorKind::remote, e.what()).with_candidate(hashes[misses[k]]);
        }
    }

    std::vector<Candidate> out;
    out.reserve(n);
    for (std::size_t k = 0; k < misses.size(); ++k) {
        book_.cache.emplace(hashes[misses[k]], miss_scores[k]);
    }
    book_.oracle_calls += misses.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double s = book_.cache.at(hashes[i]);
        if (cached[i]) ++book_.cache_hits;
        QueryRecord rec{book_.trace.queries.size(), hashes[i], s, phase, cached[i]};
        book_.trace.queries.push_back(rec);
        if (sink_) sink_(rec);
        out.emplace_back(std::move(patterns[i]), s, book_.next_id++, hashes[i]);
    }
    return out;
}

// Mutation primitives -----------------------------------------------------------

Pattern random_pattern(Rng& rng, int side_exponent) {
    Pattern p(side_exponent);
    for (auto& c : p.channels()) c = rng.uniform_byte();
    return p;
}

std::uint8_t clip(double v) noexcept {
    if (std::isnan(v)) return 0;
    const double r = std::round(v);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

Pattern mutate_scatter(const Pattern& pattern, const Direction& delta, double eps, Rng& rng) {
    if (delta.exponent() != pattern.exponent()) {
        throw ShapeMismatch("direction and pattern sizes differ");
    }
    Pattern out = pattern;
    auto ch = out.channels();
    auto d = delta.entries();
    for (std::size_t i = 0; i < ch.size(); ++i) {
        const double u = rng.uniform01();
        if (d[i] != 0) {
            ch[i] = clip(static_cast<double>(ch[i]) + u * eps * d[i]);
        }
    }
    return out;
}

Pattern mutate_scatter(const Candidate& c, const Direction& delta, double eps, Rng& rng) {
    return mutate_scatter(c.pattern(), delta, eps, rng);
}

Direction directed_delta(const Pattern& current, const Pattern& best_mutant) {
    if (current.exponent() != best_mutant.exponent()) {
        throw ShapeMismatch("directed_delta on patterns of different size");
    }
    auto a = current.channels();
    auto b = best_mutant.channels();
    std::vector<std::int8_t> e(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        e[i] = static_cast<std::int8_t>((b[i] > a[i]) - (b[i] < a[i]));
    }
    return Direction(current.exponent(), std::move(e));
}

Direction directed_delta(const Candidate& current, const Candidate& best_mutant) {
    return directed_delta(current.pattern(), best_mutant.pattern());
}

Direction random_delta(Rng& rng, int side_exponent) {
    const std::size_t side = std::size_t{1} << side_exponent;
    std::vector<std::int8_t> e(side * side * kChannels);
    for (auto& v : e) v = rng.sign();
    return Direction(side_exponent, std::move(e));
}

// Phases --------------------------------------------------------------------------

InnerResult inner_search(const Candidate& start, const SearchConfig& cfg, ScoringSession& session,
                         Rng& rng) {
    const int p = start.pattern().exponent();
    InnerResult result{start, {}};
    Candidate& current = result.best;
    Direction delta = random_delta(rng, p);
    bool directed = false;
    for (int it = 0; it < cfg.inner_iterations; ++it) {
        std::vector<Pattern> mutants;
        mutants.reserve(static_cast<std::size_t>(cfg.mutations_per_step));
        for (int w = 0; w < cfg.mutations_per_step; ++w) {
            mutants.push_back(mutate_scatter(current, delta, cfg.eps_inner, rng));
        }
        auto scored = session.score(std::move(mutants), directed ? Phase::directed : Phase::scatter);
        const auto best = std::min_element(scored.begin(), scored.end(), ranks_before);
        if (best->score() < current.score()) {
            delta = directed_delta(current, *best);
            current = *best;
            directed = true;
        } else {
            delta = random_delta(rng, p);
            directed = false;
        }
        result.evaluated.insert(result.evaluated.end(), std::make_move_iterator(scored.begin()),
                                std::make_move_iterator(scored.end()));
    }
    return result;
}

SolidPool global_explore(const SolidPool& pool, const SearchConfig& cfg, ScoringSession& session,
                         Rng& rng) {
    SolidPool next = pool;
    std::vector<Candidate> fresh;
    for (const auto& member : pool.members()) {
        std::vector<Pattern> mutants;
        mutants.reserve(static_cast<std::size_t>(cfg.global_steps));
        for (int g = 0; g < cfg.global_steps; ++g) {
            const Direction d = random_delta(rng, member.pattern().exponent());
            mutants.push_back(mutate_scatter(member, d, cfg.eps_global, rng));
        }
        auto scored = session.score(std::move(mutants), Phase::global);
        fresh.insert(fresh.end(), std::make_move_iterator(scored.begin()),
                     std::make_move_iterator(scored.end()));
    }
    next.merge(fresh);
    return next;
}

// Checkpoints ---------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "mosaic-search-checkpoint";

nlohmann::json candidate_json(const Candidate& c) {
    return {{"id", c.id()},
            {"hash", hash_hex(c.hash())},
            {"score", c.score()},
            {"exponent", c.pattern().exponent()},
            {"pixels", base64_encode(c.pattern().channels())}};
}

Candidate candidate_from_json(const nlohmann::json& j) {
    auto bytes = base64_decode(j.at("pixels").get<std::string>());
    Pattern p(j.at("exponent").get<int>(), std::move(bytes));
    Candidate c(std::move(p), j.at("score").get<double>(), j.at("id").get<std::uint64_t>());
    if (hash_hex(c.hash()) != j.at("hash").get<std::string>()) {
        throw std::invalid_argument("checkpoint candidate hash does not match its pixels");
    }
    return c;
}

nlohmann::json er_json(const ErConfig& er) {
    return {{"p", er.pattern_exponent}, {"e", er.enlarge_exponent}, {"r", er.repeat_exponent}};
}

ErConfig er_from_json(const nlohmann::json& j) {
    ErConfig er{j.at("p").get<int>(), j.at("e").get<int>(), j.at("r").get<int>()};
    er.validate();
    return er;
}

}  // namespace

nlohmann::json to_json(const Checkpoint& cp) {
    nlohmann::json pool = nlohmann::json::array();
    for (const auto& c : cp.pool.members()) pool.push_back(candidate_json(c));
    nlohmann::json queries = nlohmann::json::array();
    for (const auto& q : cp.book.trace.queries) queries.push_back(to_json(q));
    nlohmann::json cache = nlohmann::json::array();
    for (const auto& [h, s] : cp.book.cache) cache.push_back({hash_hex(h), s});
    nlohmann::json transforms = nlohmann::json::array();
    for (const auto& t : cp.transforms) {
        transforms.push_back({{"distance_m", t.distance_m()}, {"azimuth_deg", t.azimuth_deg()}});
    }
    return {{"format", kCheckpointFormat},
            {"version", Checkpoint::kVersion},
            {"search", cp.cfg},
            {"er", er_json(cp.er)},
            {"transforms", std::move(transforms)},
            {"initialized", cp.initialized},
            {"completed_loops", cp.completed_loops},
            {"rng_state", cp.rng_state},
            {"pool_capacity", cp.pool.capacity()},
            {"pool", std::move(pool)},
            {"next_id", cp.book.next_id},
            {"oracle_calls", cp.book.oracle_calls},
            {"cache_hits", cp.book.cache_hits},
            {"cache", std::move(cache)},
            {"trace", {{"queries", std::move(queries)}, {"pool_best", cp.book.trace.pool_best}}}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) {
            throw std::invalid_argument("not a search checkpoint");
        }
        if (j.at("version").get<int>() != Checkpoint::kVersion) {
            throw std::invalid_argument("unsupported checkpoint version " +
                                        std::to_string(j.at("version").get<int>()));
        }
        Checkpoint cp;
        cp.cfg = j.at("search").get<SearchConfig>();
        cp.cfg.validate();
        cp.er = er_from_json(j.at("er"));
        for (const auto& t : j.at("transforms")) {
            cp.transforms.emplace_back(t.at("distance_m").get<double>(),
                                       t.at("azimuth_deg").get<double>());
        }
        cp.initialized = j.at("initialized").get<bool>();
        cp.completed_loops = j.at("completed_loops").get<int>();
        cp.rng_state = j.at("rng_state").get<std::string>();
        cp.pool = SolidPool(j.at("pool_capacity").get<std::size_t>());
        std::vector<Candidate> members;
        for (const auto& c : j.at("pool")) members.push_back(candidate_from_json(c));
        cp.pool.merge(members);
        cp.book.next_id = j.at("next_id").get<std::uint64_t>();
        cp.book.oracle_calls = j.at("oracle_calls").get<std::uint64_t>();
        cp.book.cache_hits = j.at("cache_hits").get<std::uint64_t>();
        for (const auto& e : j.at("cache")) {
            cp.book.cache.emplace(parse_hash_hex(e.at(0).get<std::string>()), e.at(1).get<double>());
        }
        for (const auto& q : j.at("trace").at("queries")) {
            cp.book.trace.queries.push_back(query_record_from_json(q));
        }
        cp.book.trace.pool_best = j.at("trace").at("pool_best").get<std::vector<double>>();
        return cp;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
        out << to_json(cp).dump() << '\n';
        if (!out) throw std::runtime_error("checkpoint write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("cannot move checkpoint into place: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open checkpoint " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

// Full run ------------------------------------------------------------------------

SearchAborted::SearchAborted(const OracleError& cause, bool checkpoint_written)
    : std::runtime_error(std::string("search aborted: ") + cause.what() +
                         (cause.candidate() ? " [candidate " + hash_hex(*cause.candidate()) + "]" : "")),
      cause_(cause),
      checkpoint_written_(checkpoint_written) {}

namespace {

SearchResult drive(Checkpoint state, Oracle& oracle, const SearchOptions& options) {
    const SearchConfig& cfg = state.cfg;
    Rng rng(cfg.seed);
    if (!state.rng_state.empty()) rng.load_state(state.rng_state);

    Checkpoint boundary = state;
    ScoringSession session(oracle, state.er, state.transforms, cfg.parallelism, cfg.oracle_retries,
                           state.book, options.on_query);

    auto mark_boundary = [&] {
        state.rng_state = rng.save_state();
        boundary = state;
        if (options.on_checkpoint) options.on_checkpoint(boundary);
    };
    auto record_best = [&] { state.book.trace.pool_best.push_back(state.pool.best().score()); };

    try {
        if (!state.initialized) {
            std::vector<Pattern> init;
            init.reserve(static_cast<std::size_t>(cfg.init_count));
            for (int i = 0; i < cfg.init_count; ++i) {
                init.push_back(random_pattern(rng, state.er.pattern_exponent));
            }
            auto scored = session.score(std::move(init), Phase::init);
            state.pool = SolidPool(static_cast<std::size_t>(cfg.pool_size));
            state.pool.merge(scored);
            record_best();
            state.initialized = true;
            mark_boundary();
        }
        while (state.completed_loops < cfg.outer_loops) {
            const auto starts = state.pool.top(static_cast<std::size_t>(cfg.start_count));
            std::vector<Candidate> generated;
            for (const auto& s : starts) {
                auto r = inner_search(s, cfg, session, rng);
                generated.insert(generated.end(), std::make_move_iterator(r.evaluated.begin()),
                                 std::make_move_iterator(r.evaluated.end()));
            }
            state.pool.merge(generated);
            record_best();
            state.pool = global_explore(state.pool, cfg, session, rng);
            record_best();
            ++state.completed_loops;
            mark_boundary();
        }
    } catch (const OracleError& e) {
        const bool write = state.book.oracle_calls > 0 && static_cast<bool>(options.on_checkpoint);
        if (write) options.on_checkpoint(boundary);
        throw SearchAborted(e, write);
    }

    SearchResult out;
    out.pool = std::move(state.pool);
    out.trace = std::move(state.book.trace);
    out.planned_queries = cfg.planned_queries();
    out.oracle_calls = state.book.oracle_calls;
    out.cache_hits = state.book.cache_hits;
    return out;
}

}  // namespace

SearchResult run_search(const SearchConfig& cfg, const ErConfig& er, Oracle& oracle,
                        const SearchOptions& options) {
    cfg.validate();
    er.validate();
    Checkpoint start;
    start.cfg = cfg;
    start.er = er;
    start.transforms = options.transforms.empty() ? training_grid() : options.transforms;
    start.pool = SolidPool(static_cast<std::size_t>(cfg.pool_size));
    return drive(std::move(start), oracle, options);
}

SearchResult resume_search(const Checkpoint& checkpoint, Oracle& oracle,
                           const SearchOptions& options) {
    checkpoint.cfg.validate();
    checkpoint.er.validate();
    return drive(checkpoint, oracle, options);
}

std::string serialize_pool(const SolidPool& pool) {
    std::ostringstream os;
    for (const auto& c : pool.members()) {
        os << candidate_json(c).dump() << '\n';
    }
    return os.str();
}

std::string serialize_trace(const SearchTrace& trace) {
    std::ostringstream os;
    for (const auto& q : trace.queries) os << to_json(q).dump() << '\n';
    os << nlohmann::json(trace.pool_best).dump() << '\n';
    return os.str();
}

}  // namespace mosaic
