#include "mosaic/runner.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mosaic/codec.hpp"
#include "mosaic/parallel.hpp"
#include "mosaic/png_io.hpp"
#include "mosaic/remote_oracle.hpp"
#include "mosaic/texture_lab.hpp"

namespace mosaic {

namespace fs = std::filesystem;

namespace {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(text);
    while (std::getline(is, cur, sep)) parts.push_back(cur);
    if (!text.empty() && text.back() == sep) parts.emplace_back();
    return parts;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size() || s.front() == '-') {
        throw std::invalid_argument("bad " + what + " '" + s + "'");
    }
    return v;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Maps exceptions onto exit statuses with a one-line diagnostic.
template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
    try {
        return fn();
    } catch (const SearchAborted& e) {
        log << "error: " << e.what()
            << (e.checkpoint_written() ? " (checkpoint written)" : " (no checkpoint)") << '\n';
        return kExitOracle;
    } catch (const OracleError& e) {
        log << "error: oracle failed: " << e.what() << '\n';
        return kExitOracle;
    } catch (const PngError& e) {
        log << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const IoError& e) {
        log << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        log << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        log << "error: invalid configuration: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        log << "error: invalid configuration: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitIo;
    }
}

std::vector<double> evaluate_checked(Oracle& oracle, const OracleQuery& query) {
    auto scores = oracle.evaluate(query);
    validate_response(query, scores);
    return scores;
}

}  // namespace

// OracleSpec ------------------------------------------------------------------------

OracleSpec OracleSpec::parse(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.empty()) throw std::invalid_argument("empty oracle spec");
    OracleSpec spec;
    const std::string& kind = parts[0];
    if (kind == "constant" && parts.size() == 2) {
        spec.kind = Kind::constant;
        std::size_t used = 0;
        try {
            spec.constant = std::stod(parts[1], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != parts[1].size() || !(spec.constant >= 0.0 && spec.constant <= 1.0)) {
            throw std::invalid_argument("constant oracle needs a score in [0, 1], got '" + parts[1] + "'");
        }
    } else if (kind == "planted" && parts.size() == 2) {
        spec.kind = Kind::planted;
        spec.seed = parse_u64(parts[1], "oracle seed");
    } else if (kind == "frequency" && parts.size() == 3) {
        spec.kind = Kind::frequency;
        spec.seed = parse_u64(parts[1], "oracle seed");
        const auto e = parse_u64(parts[2], "preferred block exponent");
        if (e > static_cast<std::uint64_t>(kTextureExponent)) {
            throw std::invalid_argument("preferred block exponent must lie in [0, 11]");
        }
        spec.preferred_e = static_cast<int>(e);
    } else if (kind == "remote" && (parts.size() == 1 || parts.size() >= 3)) {
        spec.kind = Kind::remote;
        if (parts.size() >= 3) {
            spec.address = text.substr(std::string("remote:").size());
            (void)parse_address(spec.address);
        }
    } else {
        throw std::invalid_argument(
            "bad oracle spec '" + text +
            "' (expected constant:<c> | planted:<seed> | frequency:<seed>:<e> | remote[:<host>:<port>])");
    }
    return spec;
}

std::string OracleSpec::to_string() const {
    switch (kind) {
        case Kind::constant: {
            std::ostringstream os;
            os << "constant:" << std::setprecision(17) << constant;
            return os.str();
        }
        case Kind::planted: return "planted:" + std::to_string(seed);
        case Kind::frequency: return "frequency:" + std::to_string(seed) + ":" + std::to_string(preferred_e);
        case Kind::remote: return address.empty() ? "remote" : "remote:" + address;
    }
    return "unknown";
}

std::unique_ptr<Oracle> make_oracle(const OracleSpec& spec, const ErConfig& er) {
    switch (spec.kind) {
        case OracleSpec::Kind::constant: return std::make_unique<ConstantOracle>(spec.constant);
        case OracleSpec::Kind::planted:
            return std::make_unique<PlantedWeaknessOracle>(spec.seed, er.pattern_exponent);
        case OracleSpec::Kind::frequency:
            return std::make_unique<FrequencyPreferenceOracle>(spec.seed, spec.preferred_e);
        case OracleSpec::Kind::remote: {
            std::string address = spec.address;
            if (address.empty()) {
                const char* env = std::getenv(kOracleAddressEnv);
                if (env == nullptr || *env == '\0') {
                    throw std::invalid_argument(std::string("remote oracle needs an address or ") +
                                                kOracleAddressEnv);
                }
                address = env;
            }
            return std::make_unique<RemoteOracle>(address);
        }
    }
    throw std::invalid_argument("unknown oracle kind");
}

RenderMode parse_render_mode(const std::string& name) {
    if (name == "er") return RenderMode::er;
    if (name == "bilinear") return RenderMode::bilinear;
    throw std::invalid_argument("unknown render mode '" + name + "' (expected er|bilinear)");
}

const char* to_string(RenderMode mode) noexcept { return mode == RenderMode::er ? "er" : "bilinear"; }

// RunConfig -------------------------------------------------------------------------

void RunConfig::validate(bool need_out_dir) const {
    search.validate();
    er.validate();
    if (oracle.kind == OracleSpec::Kind::remote && !oracle.address.empty()) {
        (void)parse_address(oracle.address);
    }
    if (need_out_dir) {
        if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
        const fs::path probe = out_dir / ".write_probe";
        {
            std::ofstream p(probe);
            if (!p) throw IoError("output directory " + out_dir.string() + " is not writable");
        }
        fs::remove(probe, ec);
    }
}

nlohmann::json to_json(const RunConfig& cfg) {
    nlohmann::json j{{"search", cfg.search},
                     {"er", cfg.er.label()},
                     {"oracle", cfg.oracle.to_string()},
                     {"out_dir", cfg.out_dir.generic_string()}};
    if (cfg.transforms) j["transforms"] = to_string(*cfg.transforms);
    if (cfg.resume_from) j["resume_from"] = cfg.resume_from->generic_string();
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
    RunConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "search") cfg.search = value.get<SearchConfig>();
            else if (key == "er") cfg.er = ErConfig::from_label(value.get<std::string>());
            else if (key == "oracle") cfg.oracle = OracleSpec::parse(value.get<std::string>());
            else if (key == "transforms") cfg.transforms = parse_transform_set(value.get<std::string>());
            else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
            else if (key == "resume_from") {
                if (!value.is_null()) cfg.resume_from = fs::path(value.get<std::string>());
            } else throw std::invalid_argument("unknown run config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("run config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

// search ----------------------------------------------------------------------------

int cmd_search(const RunConfig& cfg_in, std::ostream& log) {
    return guarded(log, [&] {
        RunConfig cfg = cfg_in;
        std::optional<Checkpoint> resume;
        if (cfg.resume_from) {
            resume = load_checkpoint(cfg.resume_from->string());
            // The checkpoint pins everything that affects the outcome.
            const int parallelism = cfg.search.parallelism;
            cfg.search = resume->cfg;
            cfg.search.parallelism = parallelism;
            cfg.er = resume->er;
            resume->cfg.parallelism = parallelism;
        }
        cfg.validate(true);
        const auto transforms = resume ? resume->transforms
                                       : transform_grid(cfg.transforms.value_or(TransformSet::training));

        auto oracle = make_oracle(cfg.oracle, cfg.er);

        const fs::path ckpt_dir = cfg.out_dir / "checkpoints";
        const fs::path pool_dir = cfg.out_dir / "pool";
        fs::create_directories(ckpt_dir);
        fs::create_directories(pool_dir);

        std::ofstream trace_log(cfg.out_dir / "trace.jsonl", std::ios::trunc);
        if (!trace_log) throw IoError("cannot open trace log");
        if (resume) {
            for (const auto& q : resume->book.trace.queries) trace_log << to_json(q).dump() << '\n';
            trace_log.flush();
        }

        SearchOptions options;
        options.transforms = transforms;
        options.on_query = [&](const QueryRecord& r) { trace_log << to_json(r).dump() << '\n' << std::flush; };
        options.on_checkpoint = [&](const Checkpoint& cp) {
            const std::string name =
                cp.initialized ? "loop_" + std::to_string(cp.completed_loops) + ".json" : "fresh.json";
            save_checkpoint((ckpt_dir / name).string(), cp);
            save_checkpoint((cfg.out_dir / "checkpoint.json").string(), cp);
        };

        log << "search: " << cfg.er.label() << ", oracle " << oracle->describe() << ", "
            << cfg.search.planned_queries() << " planned queries\n";
        const SearchResult result = resume ? resume_search(*resume, *oracle, options)
                                           : run_search(cfg.search, cfg.er, *oracle, options);
        trace_log.close();

        write_text(cfg.out_dir / "pool.jsonl", serialize_pool(result.pool));
        std::size_t rank = 0;
        for (const auto& c : result.pool.members()) {
            std::ostringstream stem;
            stem << "rank_" << std::setw(2) << std::setfill('0') << rank++ << '_' << hash_hex(c.hash());
            write_png(pool_dir / (stem.str() + "_pattern.png"), c.pattern());
            write_png(pool_dir / (stem.str() + "_texture.png"), er_construct(c.pattern(), cfg.er));
        }

        const Candidate& best = result.pool.best();
        const auto test_grid = testing_grid();
        const auto test_scores =
            evaluate_checked(*oracle, {TextureSource::from_pattern(best.pattern(), cfg.er), test_grid});
        const EvalReport report = compute_report(test_scores);
        write_text(cfg.out_dir / "report_testing.json",
                   dump(report_document(report, test_grid, cfg.er.label())));

        nlohmann::json summary{
            {"config", to_json(cfg)},
            {"er_label", cfg.er.label()},
            {"oracle", oracle->describe()},
            {"search_transforms", transforms.size()},
            {"budget",
             {{"planned", result.planned_queries},
              {"consumed", result.oracle_calls},
              {"cache_hits", result.cache_hits},
              {"trace_records", result.trace.queries.size()},
              {"report_queries", 1}}},
            {"initial_best", result.initial_best()},
            {"final_best", best.score()},
            {"pool_best", result.trace.pool_best},
            {"best",
             {{"hash", hash_hex(best.hash())},
              {"id", best.id()},
              {"search_score", best.score()},
              {"testing_s_avg", report.s_avg},
              {"testing_p_05", report.p_05}}},
        };
        write_text(cfg.out_dir / "summary.json", dump(summary));

        log << "search done: best " << hash_hex(best.hash()) << " score " << best.score()
            << " (initial " << result.initial_best() << "), oracle calls " << result.oracle_calls
            << ", cache hits " << result.cache_hits << ", testing S_avg " << report.s_avg
            << " P_0.5 " << report.p_05 << '\n';
        return kExitOk;
    });
}

// baseline-random -------------------------------------------------------------------

int cmd_baseline_random(const RunConfig& cfg, int n, RenderMode mode, std::ostream& log) {
    return guarded(log, [&] {
        if (n < 1) throw std::invalid_argument("baseline count must be >= 1");
        cfg.validate(true);
        auto oracle = make_oracle(cfg.oracle, cfg.er);
        const auto set = cfg.transforms.value_or(TransformSet::testing);
        const auto transforms = transform_grid(set);

        Rng rng(cfg.search.seed);
        std::vector<Pattern> patterns;
        patterns.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) patterns.push_back(random_pattern(rng, cfg.er.pattern_exponent));

        std::vector<EvalReport> reports(patterns.size());
        std::vector<std::exception_ptr> errors(patterns.size());
        const std::size_t workers =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.search.parallelism), oracle->max_parallel());
        parallel_for(patterns.size(), workers, [&](std::size_t i) {
            try {
                TextureSource src = mode == RenderMode::er
                                        ? TextureSource::from_pattern(patterns[i], cfg.er)
                                        : TextureSource::from_texture(bilinear_resize(patterns[i]));
                reports[i] = compute_report(evaluate_checked(*oracle, {std::move(src), transforms}));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }

        nlohmann::json rows = nlohmann::json::array();
        double sum_s = 0.0;
        double sum_p = 0.0;
        for (std::size_t i = 0; i < patterns.size(); ++i) {
            rows.push_back({{"index", i},
                            {"hash", hash_hex(content_hash(patterns[i]))},
                            {"s_avg", reports[i].s_avg},
                            {"p_05", reports[i].p_05}});
            sum_s += reports[i].s_avg;
            sum_p += reports[i].p_05;
        }
        const double mean_s = sum_s / n;
        const double mean_p = sum_p / n;
        const std::string label = mode == RenderMode::er ? cfg.er.label() : "bilinear";
        nlohmann::json doc{{"config", to_json(cfg)},
                           {"oracle", oracle->describe()},
                           {"render_mode", to_string(mode)},
                           {"er_label", label},
                           {"transform_set", to_string(set)},
                           {"count", n},
                           {"candidates", std::move(rows)},
                           {"aggregate", {{"mean_s_avg", mean_s}, {"mean_p_05", mean_p}}},
                           {"reference", reference_tables_json()}};
        write_text(cfg.out_dir / "baseline.json", dump(doc));
        log << "baseline-random " << label << ": " << n << " patterns, mean S_avg " << mean_s
            << ", mean P_0.5 " << mean_p << '\n';
        return kExitOk;
    });
}

// render ----------------------------------------------------------------------------

int cmd_render(const fs::path& pattern_path, const ErConfig& er, RenderMode mode,
               const fs::path& out_path, std::ostream& log) {
    return guarded(log, [&] {
        const Pattern pattern = read_png(pattern_path);
        Texture texture;
        if (mode == RenderMode::er) {
            er.validate();
            if (pattern.exponent() != er.pattern_exponent) {
                throw ShapeMismatch(pattern_path.string() + " is " + std::to_string(pattern.side()) +
                                    "px square but " + er.label() + " needs " +
                                    std::to_string(std::size_t{1} << er.pattern_exponent) + "px");
            }
            texture = er_construct(pattern, er);
        } else {
            texture = bilinear_resize(pattern);
        }
        if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
        write_png(out_path, texture);
        log << "render: wrote " << out_path.string() << " ("
            << (mode == RenderMode::er ? er.label() : std::string("bilinear")) << ")\n";
        return kExitOk;
    });
}

// eval ------------------------------------------------------------------------------

int cmd_eval(const RunConfig& cfg, const fs::path& input, InputKind kind, RenderMode mode,
             std::ostream& out, std::ostream& log) {
    return guarded(log, [&] {
        cfg.validate(false);
        const Pattern image = read_png(input);
        std::optional<TextureSource> source;
        std::string label;
        if (kind == InputKind::pattern) {
            if (mode == RenderMode::er) {
                source = TextureSource::from_pattern(image, cfg.er);
                label = cfg.er.label();
            } else {
                source = TextureSource::from_texture(bilinear_resize(image));
                label = "bilinear";
            }
        } else {
            Texture texture(image);
            // An ER-consistent texture is scored as its pattern so pattern-level oracles apply.
            Pattern recovered = recover_pattern(texture, cfg.er);
            if (er_construct(recovered, cfg.er) == texture) {
                source = TextureSource::from_pattern(std::move(recovered), cfg.er);
                label = cfg.er.label();
            } else {
                source = TextureSource::from_texture(std::move(texture));
                label = "texture";
            }
        }
        auto oracle = make_oracle(cfg.oracle, cfg.er);
        const auto transforms = transform_grid(cfg.transforms.value_or(TransformSet::testing));
        const auto report = compute_report(evaluate_checked(*oracle, {std::move(*source), transforms}));
        out << dump(report_document(report, transforms, label));
        log << "eval: S_avg " << report.s_avg << " P_0.5 " << report.p_05 << '\n';
        return kExitOk;
    });
}

}  // namespace mosaic
