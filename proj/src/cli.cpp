#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mosaic/runner.hpp"

namespace mosaic {

namespace {

/// Flags shared by every subcommand that talks to an oracle. Values stay unset
/// unless given, so they only override the config file when present.
struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> oracle;
    std::optional<std::string> transforms;
    std::optional<std::string> out_dir;
    std::optional<std::string> resume;
    std::optional<int> parallelism;
    std::optional<std::string> er;
    std::optional<int> init_count, pool_size, start_count, mutations, inner_iterations, outer_loops,
        global_steps, retries;
    std::optional<double> eps1, eps2;

    void attach(CLI::App* app, bool search_flags) {
        app->add_option("--config", config, "JSON run configuration");
        app->add_option("--seed", seed, "RNG seed for pattern sampling and mutations");
        app->add_option("--oracle", oracle,
                        "constant:<c> | planted:<seed> | frequency:<seed>:<e> | remote[:<host>:<port>]");
        app->add_option("--transforms", transforms, "training | testing")
            ->check(CLI::IsMember({"training", "testing"}));
        app->add_option("--out-dir", out_dir, "output directory");
        app->add_option("--parallelism", parallelism, "max concurrent oracle queries");
        app->add_option("--er", er, "Enlarge-and-Repeat setting, e.g. E5-R2");
        if (!search_flags) return;
        app->add_option("--resume", resume, "checkpoint to continue from");
        app->add_option("--init-count", init_count, "random candidates before the first loop");
        app->add_option("--pool-size", pool_size, "solid pool capacity");
        app->add_option("--start-count", start_count, "starting points per outer loop");
        app->add_option("--mutations", mutations, "mutants per inner iteration");
        app->add_option("--inner-iterations", inner_iterations, "inner iterations per start");
        app->add_option("--outer-loops", outer_loops, "outer loops");
        app->add_option("--global-steps", global_steps, "global mutants per pool member");
        app->add_option("--eps1", eps1, "inner mutation radius");
        app->add_option("--eps2", eps2, "global mutation radius");
        app->add_option("--retries", retries, "retries for retryable oracle failures");
    }

    RunConfig resolve() const {
        RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
        if (seed) cfg.search.seed = *seed;
        if (oracle) cfg.oracle = OracleSpec::parse(*oracle);
        if (transforms) cfg.transforms = parse_transform_set(*transforms);
        if (out_dir) cfg.out_dir = *out_dir;
        if (resume) cfg.resume_from = *resume;
        if (parallelism) cfg.search.parallelism = *parallelism;
        if (er) cfg.er = ErConfig::from_label(*er);
        if (init_count) cfg.search.init_count = *init_count;
        if (pool_size) cfg.search.pool_size = *pool_size;
        if (start_count) cfg.search.start_count = *start_count;
        if (mutations) cfg.search.mutations_per_step = *mutations;
        if (inner_iterations) cfg.search.inner_iterations = *inner_iterations;
        if (outer_loops) cfg.search.outer_loops = *outer_loops;
        if (global_steps) cfg.search.global_steps = *global_steps;
        if (eps1) cfg.search.eps_inner = *eps1;
        if (eps2) cfg.search.eps_global = *eps2;
        if (retries) cfg.search.oracle_retries = *retries;
        return cfg;
    }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mosaic camouflage search: Enlarge-and-Repeat textures optimized against a "
                 "detection-score oracle"};
    app.require_subcommand(1);

    CommonFlags search_flags;
    auto* search = app.add_subcommand("search", "run the elite-pool discrete search");
    search_flags.attach(search, true);

    CommonFlags baseline_flags;
    int count = 100;
    std::string baseline_mode = "er";
    auto* baseline = app.add_subcommand("baseline-random", "score random patterns");
    baseline_flags.attach(baseline, false);
    baseline->add_option("--count", count, "number of random patterns")->check(CLI::PositiveNumber);
    baseline->add_option("--mode", baseline_mode, "er | bilinear")->check(CLI::IsMember({"er", "bilinear"}));

    std::string render_pattern, render_out, render_er = "E5-R2", render_mode = "er";
    auto* render = app.add_subcommand("render", "build a 2048x2048 texture from a pattern PNG");
    render->add_option("--pattern", render_pattern, "pattern PNG")->required();
    render->add_option("--er", render_er, "Enlarge-and-Repeat setting, e.g. E5-R2");
    render->add_option("--mode", render_mode, "er | bilinear")->check(CLI::IsMember({"er", "bilinear"}));
    render->add_option("--out", render_out, "output PNG")->required();

    CommonFlags eval_flags;
    std::string eval_pattern, eval_texture, eval_mode = "er";
    auto* eval = app.add_subcommand("eval", "score one pattern or texture and print a report");
    eval_flags.attach(eval, false);
    auto* pattern_opt = eval->add_option("--pattern", eval_pattern, "pattern PNG");
    auto* texture_opt = eval->add_option("--texture", eval_texture, "2048x2048 texture PNG");
    pattern_opt->excludes(texture_opt);
    eval->add_option("--mode", eval_mode, "er | bilinear (pattern input)")
        ->check(CLI::IsMember({"er", "bilinear"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and --version exit 0; every other parse failure is a configuration error.
        return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (search->parsed()) {
            return cmd_search(search_flags.resolve(), err);
        }
        if (baseline->parsed()) {
            return cmd_baseline_random(baseline_flags.resolve(), count, parse_render_mode(baseline_mode), err);
        }
        if (render->parsed()) {
            return cmd_render(render_pattern, ErConfig::from_label(render_er),
                              parse_render_mode(render_mode), render_out, err);
        }
        if (eval->parsed()) {
            if (eval_pattern.empty() == eval_texture.empty()) {
                err << "error: eval needs exactly one of --pattern or --texture\n";
                return kExitConfig;
            }
            const bool is_pattern = !eval_pattern.empty();
            return cmd_eval(eval_flags.resolve(), is_pattern ? eval_pattern : eval_texture,
                            is_pattern ? InputKind::pattern : InputKind::texture,
                            parse_render_mode(eval_mode), out, err);
        }
    } catch (const std::invalid_argument& e) {
        err << "error: invalid configuration: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}

}  // namespace mosaic
