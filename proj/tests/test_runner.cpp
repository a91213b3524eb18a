#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mosaic/codec.hpp"
#include "mosaic/png_io.hpp"
#include "mosaic/runner.hpp"
#include "mosaic/texture_lab.hpp"
#include "support/mock_bridge.hpp"

using namespace mosaic;
namespace fs = std::filesystem;

namespace {

class RunnerTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() /
               ("mosaic_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path dir_;
    std::ostringstream out_, err_;

    int cli(std::vector<std::string> args) {
        args.insert(args.begin(), "mosaic");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        out_.str("");
        err_.str("");
        return run_cli(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

const std::vector<std::string> kSmall{"--init-count", "8",  "--pool-size",        "4", "--start-count",
                                      "2",            "--mutations", "3", "--inner-iterations", "2",
                                      "--outer-loops", "3", "--global-steps", "2"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

// Search --------------------------------------------------------------------------

TEST_F(RunnerTest, SearchWithPublishedDefaults) {
    const fs::path out = dir_ / "run";
    ASSERT_EQ(cli({"search", "--oracle", "planted:0", "--out-dir", out.string()}), kExitOk) << err_.str();
    EXPECT_EQ(line_count(out / "trace.jsonl"), 3600u);
    const auto summary = read_json(out / "summary.json");
    EXPECT_EQ(summary["budget"]["planned"], 3600);
    EXPECT_EQ(summary["budget"]["consumed"].get<int>() + summary["budget"]["cache_hits"].get<int>(), 3600);
    EXPECT_EQ(summary["er_label"], "E5-R2");
    EXPECT_EQ(summary["search_transforms"], 16);
    EXPECT_LE(summary["final_best"].get<double>(), summary["initial_best"].get<double>());
    EXPECT_EQ(line_count(out / "pool.jsonl"), 20u);
    std::size_t pngs = 0;
    for (const auto& f : fs::directory_iterator(out / "pool")) pngs += f.path().extension() == ".png";
    EXPECT_EQ(pngs, 40u);
    for (const char* name : {"loop_0.json", "loop_1.json", "loop_5.json"})
        EXPECT_TRUE(fs::exists(out / "checkpoints" / name)) << name;
    EXPECT_TRUE(fs::exists(out / "checkpoint.json"));
    const auto report = read_json(out / "report_testing.json");
    EXPECT_EQ(report["transform_count"], 96);
    EXPECT_EQ(report["er_label"], "E5-R2");
    EXPECT_DOUBLE_EQ(report["s_avg"].get<double>(), summary["best"]["testing_s_avg"].get<double>());

    // Best pattern on disk reproduces the pool's best.
    const auto first = nlohmann::json::parse(slurp(out / "pool.jsonl").substr(0, slurp(out / "pool.jsonl").find('\n')));
    const std::string hash = summary["best"]["hash"];
    const Pattern best = read_png(out / "pool" / ("rank_00_" + hash + "_pattern.png"));
    EXPECT_EQ(hash_hex(content_hash(best)), hash);
    EXPECT_EQ(first["hash"], hash);
    EXPECT_EQ(read_png(out / "pool" / ("rank_00_" + hash + "_texture.png")),
              er_construct(best, ErConfig{}).grid());
}

TEST_F(RunnerTest, InvalidConfigsFailBeforeQuerying) {
    const fs::path out = dir_ / "bad";
    EXPECT_EQ(cli({"search", "--oracle", "planted:0", "--start-count", "20", "--out-dir", out.string()}),
              kExitConfig);
    EXPECT_NE(err_.str().find("start"), std::string::npos) << err_.str();
    EXPECT_FALSE(fs::exists(out / "trace.jsonl"));
    EXPECT_EQ(cli({"search", "--er", "E9-R5", "--out-dir", out.string()}), kExitConfig);
    EXPECT_EQ(cli({"search", "--oracle", "oracle-of-delphi", "--out-dir", out.string()}), kExitConfig);
    EXPECT_EQ(cli({"search", "--eps1", "0", "--out-dir", out.string()}), kExitConfig);
    EXPECT_EQ(cli({"search", "--transforms", "sideways", "--out-dir", out.string()}), kExitConfig);
    EXPECT_EQ(cli({"search", "--no-such-flag"}), kExitConfig);
    EXPECT_EQ(cli({"search", "--help"}), kExitOk);
    EXPECT_FALSE(fs::exists(out / "trace.jsonl"));
}

TEST_F(RunnerTest, ResumeFromCheckpointMatchesFullRun) {
    const fs::path full = dir_ / "full", resumed = dir_ / "resumed";
    ASSERT_EQ(cli(with({"search", "--oracle", "planted:3", "--seed", "5", "--er", "E8-R1", "--out-dir",
                        full.string()},
                       kSmall)),
              kExitOk)
        << err_.str();
    ASSERT_EQ(cli({"search", "--oracle", "planted:3", "--resume", (full / "checkpoints" / "loop_2.json").string(),
                   "--out-dir", resumed.string(), "--parallelism", "4"}),
              kExitOk)
        << err_.str();
    EXPECT_EQ(slurp(resumed / "pool.jsonl"), slurp(full / "pool.jsonl"));
    EXPECT_EQ(slurp(resumed / "trace.jsonl"), slurp(full / "trace.jsonl"));
    EXPECT_EQ(read_json(resumed / "summary.json")["final_best"], read_json(full / "summary.json")["final_best"]);
    EXPECT_EQ(read_json(resumed / "summary.json")["er_label"], "E8-R1");
}

TEST_F(RunnerTest, OracleLossCheckpointsAndResumes) {
    // A remote oracle that scores like planted:3; the first bridge drops the
    // connection part way through the run.
    const ErConfig er{2, 5, 4};
    PlantedWeaknessOracle planted(3, 2);
    auto responder = [&](const nlohmann::json& req) {
        const Texture t(decode_png(base64_decode(req.at("texture_png_b64").get<std::string>())));
        std::vector<CameraTransform> ts;
        for (const auto& j : req.at("transforms"))
            ts.emplace_back(j.at("distance_m").get<double>(), j.at("azimuth_deg").get<double>());
        const OracleQuery q{TextureSource::from_pattern(recover_pattern(t, er), er), ts};
        return nlohmann::json{{"type", "result"}, {"id", req.at("id")}, {"scores", planted.evaluate(q)}};
    };
    const std::vector<std::string> tiny{"--init-count",       "6", "--pool-size",   "3", "--start-count", "1",
                                        "--mutations",        "3", "--inner-iterations", "2",
                                        "--outer-loops",      "2", "--global-steps", "2", "--er", "E5-R4"};

    const fs::path local = dir_ / "local", broken = dir_ / "broken", healed = dir_ / "healed";
    ASSERT_EQ(cli(with({"search", "--oracle", "planted:3", "--out-dir", local.string()}, tiny)), kExitOk)
        << err_.str();

    {
        mosaic::testing::MockBridgeOptions opts;
        opts.responder = responder;
        opts.close_after = 16;  // past initialization, inside the first loop
        mosaic::testing::MockBridge bridge(opts);
        EXPECT_EQ(cli(with({"search", "--oracle", "remote:" + bridge.address(), "--out-dir", broken.string()},
                           tiny)),
                  kExitOracle);
        EXPECT_NE(err_.str().find("checkpoint written"), std::string::npos) << err_.str();
    }
    ASSERT_TRUE(fs::exists(broken / "checkpoint.json"));
    EXPECT_TRUE(read_json(broken / "checkpoint.json")["initialized"].get<bool>());

    mosaic::testing::MockBridgeOptions opts;
    opts.responder = responder;
    mosaic::testing::MockBridge bridge(opts);
    ::setenv(kOracleAddressEnv, bridge.address().c_str(), 1);
    const int rc = cli({"search", "--oracle", "remote", "--resume", (broken / "checkpoint.json").string(),
                        "--out-dir", healed.string()});
    ::unsetenv(kOracleAddressEnv);
    ASSERT_EQ(rc, kExitOk) << err_.str();
    EXPECT_EQ(slurp(healed / "pool.jsonl"), slurp(local / "pool.jsonl"));
    EXPECT_EQ(slurp(healed / "trace.jsonl"), slurp(local / "trace.jsonl"));
}

TEST_F(RunnerTest, AbortDuringInitializationLeavesNoCheckpoint) {
    // The initial batch commits as a whole, so a failure inside it has nothing to save.
    mosaic::testing::MockBridgeOptions opts;
    opts.close_after = 4;
    const fs::path out = dir_ / "early";
    {
        mosaic::testing::MockBridge bridge(opts);
        EXPECT_EQ(cli(with({"search", "--oracle", "remote:" + bridge.address(), "--out-dir", out.string()}, kSmall)),
                  kExitOracle);
    }
    EXPECT_NE(err_.str().find("no checkpoint"), std::string::npos) << err_.str();
    EXPECT_FALSE(fs::exists(out / "checkpoint.json"));
    EXPECT_TRUE(fs::is_empty(out / "checkpoints"));
}

TEST_F(RunnerTest, UnreachableOracleIsAnOracleFailure) {
    int port = 0;
    {
        mosaic::testing::MockBridge gone;
        port = std::stoi(gone.address().substr(gone.address().rfind(':') + 1));
    }
    EXPECT_EQ(cli(with({"search", "--oracle", "remote:127.0.0.1:" + std::to_string(port), "--out-dir",
                        (dir_ / "x").string()},
                       kSmall)),
              kExitOracle);
    ::unsetenv(kOracleAddressEnv);
    EXPECT_EQ(cli({"search", "--oracle", "remote", "--out-dir", (dir_ / "y").string()}), kExitConfig);
}

// Baseline --------------------------------------------------------------------------

TEST_F(RunnerTest, BaselineConstantAndSingle) {
    ASSERT_EQ(cli({"baseline-random", "--oracle", "constant:0.7", "--count", "5", "--out-dir", dir_.string()}),
              kExitOk);
    auto doc = read_json(dir_ / "baseline.json");
    EXPECT_NEAR(doc["aggregate"]["mean_s_avg"].get<double>(), 0.7, 1e-12);
    EXPECT_EQ(doc["aggregate"]["mean_p_05"], 1.0);
    EXPECT_EQ(doc["candidates"].size(), 5u);
    EXPECT_EQ(doc["transform_set"], "testing");

    ASSERT_EQ(cli({"baseline-random", "--oracle", "planted:1", "--count", "1", "--out-dir", dir_.string()}),
              kExitOk);
    doc = read_json(dir_ / "baseline.json");
    ASSERT_EQ(doc["candidates"].size(), 1u);
    EXPECT_EQ(doc["aggregate"]["mean_s_avg"], doc["candidates"][0]["s_avg"]);

    EXPECT_NE(cli({"baseline-random", "--count", "0", "--out-dir", dir_.string()}), kExitOk);
}

TEST_F(RunnerTest, BaselinePlantedNearOneThird) {
    ASSERT_EQ(cli({"baseline-random", "--oracle", "planted:0", "--count", "1000", "--out-dir", dir_.string()}),
              kExitOk);
    const auto doc = read_json(dir_ / "baseline.json");
    EXPECT_NEAR(doc["aggregate"]["mean_s_avg"].get<double>(), 1.0 / 3.0, 0.02);
    // Same seed, same candidates.
    const std::string first = slurp(dir_ / "baseline.json");
    ASSERT_EQ(cli({"baseline-random", "--oracle", "planted:0", "--count", "1000", "--parallelism", "4",
                   "--out-dir", dir_.string()}),
              kExitOk);
    EXPECT_EQ(read_json(dir_ / "baseline.json")["candidates"], doc["candidates"]);
}

TEST_F(RunnerTest, BaselineBilinearMode) {
    ASSERT_EQ(cli({"baseline-random", "--oracle", "frequency:0:5", "--count", "3", "--mode", "bilinear",
                   "--out-dir", dir_.string()}),
              kExitOk)
        << err_.str();
    const auto doc = read_json(dir_ / "baseline.json");
    EXPECT_EQ(doc["er_label"], "bilinear");
    EXPECT_GT(doc["aggregate"]["mean_s_avg"].get<double>(), 0.9);
}

// Render / eval ----------------------------------------------------------------------

TEST_F(RunnerTest, RenderModes) {
    Rng rng(2);
    const Pattern p = random_pattern(rng, 4);
    write_png(dir_ / "p.png", p);
    ASSERT_EQ(cli({"render", "--pattern", (dir_ / "p.png").string(), "--er", "E5-R2", "--out",
                   (dir_ / "t.png").string()}),
              kExitOk);
    const Pattern er = read_png(dir_ / "t.png");
    EXPECT_EQ(er, er_construct(p, ErConfig{}).grid());
    for (std::size_t r = 0; r < 32; ++r)
        for (std::size_t c = 0; c < 32; ++c) ASSERT_EQ(er.pixel(r, c), p.pixel(0, 0));

    ASSERT_EQ(cli({"render", "--pattern", (dir_ / "p.png").string(), "--mode", "bilinear", "--out",
                   (dir_ / "sub" / "b.png").string()}),
              kExitOk);
    const Pattern bl = read_png(dir_ / "sub" / "b.png");
    EXPECT_EQ(bl, bilinear_resize(p).grid());
    EXPECT_NE(bl, er);

    write_png(dir_ / "big.png", random_pattern(rng, 5));
    EXPECT_NE(cli({"render", "--pattern", (dir_ / "big.png").string(), "--er", "E5-R2", "--out",
                   (dir_ / "u.png").string()}),
              kExitOk);
    EXPECT_NE(err_.str().find("E5-R2"), std::string::npos);
    EXPECT_EQ(cli({"render", "--pattern", (dir_ / "missing.png").string(), "--out", (dir_ / "v.png").string()}),
              kExitIo);
}

TEST_F(RunnerTest, EvalPatternAndTexture) {
    Rng rng(3);
    const Pattern p = random_pattern(rng, 4);
    write_png(dir_ / "p.png", p);
    write_png(dir_ / "t.png", er_construct(p, ErConfig{}));

    ASSERT_EQ(cli({"eval", "--oracle", "planted:4", "--pattern", (dir_ / "p.png").string()}), kExitOk) << err_.str();
    const auto from_pattern = nlohmann::json::parse(out_.str());
    EXPECT_EQ(from_pattern["transform_count"], 96);
    EXPECT_EQ(from_pattern["er_label"], "E5-R2");

    PlantedWeaknessOracle planted(4, 4);
    std::vector<double> scores;
    for (const auto& t : testing_grid()) scores.push_back(std::clamp(planted.distance(p) + planted.offset(t), 0.0, 1.0));
    EXPECT_NEAR(from_pattern["s_avg"].get<double>(), compute_report(scores).s_avg, 1e-12);

    ASSERT_EQ(cli({"eval", "--oracle", "planted:4", "--texture", (dir_ / "t.png").string()}), kExitOk);
    EXPECT_EQ(nlohmann::json::parse(out_.str())["s_avg"], from_pattern["s_avg"]);

    ASSERT_EQ(cli({"eval", "--oracle", "planted:4", "--pattern", (dir_ / "p.png").string(), "--transforms",
                   "training"}),
              kExitOk);
    EXPECT_EQ(nlohmann::json::parse(out_.str())["transform_count"], 16);

    // A texture that is not an ER image needs an oracle that accepts raw textures.
    write_png(dir_ / "smooth.png", bilinear_resize(p));
    EXPECT_EQ(cli({"eval", "--oracle", "planted:4", "--texture", (dir_ / "smooth.png").string()}), kExitOracle);
    ASSERT_EQ(cli({"eval", "--oracle", "frequency:0:5", "--texture", (dir_ / "smooth.png").string()}), kExitOk);
    EXPECT_EQ(nlohmann::json::parse(out_.str())["er_label"], "texture");

    EXPECT_EQ(cli({"eval", "--oracle", "planted:4"}), kExitConfig);
}

// Configuration ----------------------------------------------------------------------

TEST_F(RunnerTest, ConfigFileWithOverrides) {
    const fs::path cfg = dir_ / "cfg.json";
    {
        std::ofstream f(cfg);
        f << R"({"search": {"init_count": 10, "pool_size": 4, "start_count": 2, "mutations_per_step": 2,
                            "inner_iterations": 1, "outer_loops": 1, "global_steps": 1, "seed": 9},
                 "er": "E6-R1", "oracle": "constant:0.3", "out_dir": ")"
          << (dir_ / "from_file").generic_string() << R"("})";
    }
    ASSERT_EQ(cli({"search", "--config", cfg.string(), "--seed", "10"}), kExitOk) << err_.str();
    const auto summary = read_json(dir_ / "from_file" / "summary.json");
    EXPECT_EQ(summary["config"]["search"]["seed"], 10);
    EXPECT_EQ(summary["er_label"], "E6-R1");
    EXPECT_EQ(summary["budget"]["planned"], 10 + 1 * (2 * 1 * 2 + 4 * 1));
    EXPECT_DOUBLE_EQ(summary["final_best"].get<double>(), 0.3);

    {
        std::ofstream f(dir_ / "bad.json");
        f << R"({"serach": {}})";
    }
    EXPECT_EQ(cli({"search", "--config", (dir_ / "bad.json").string()}), kExitConfig);
    {
        std::ofstream f(dir_ / "broken.json");
        f << "{ not json";
    }
    EXPECT_EQ(cli({"search", "--config", (dir_ / "broken.json").string()}), kExitConfig);
    EXPECT_EQ(cli({"search", "--config", (dir_ / "absent.json").string()}), kExitConfig);
}

TEST(RunConfig, JsonRoundTrip) {
    RunConfig c;
    c.search.seed = 4;
    c.search.eps_global = 7.5;
    c.er = ErConfig::from_label("E4-R3");
    c.oracle = OracleSpec::parse("frequency:2:6");
    c.transforms = TransformSet::testing;
    c.out_dir = "somewhere/else";
    c.resume_from = "ck.json";
    const RunConfig back = run_config_from_json(to_json(c));
    EXPECT_EQ(back.search, c.search);
    EXPECT_EQ(back.er, c.er);
    EXPECT_EQ(back.oracle.to_string(), "frequency:2:6");
    EXPECT_EQ(back.transforms, c.transforms);
    EXPECT_EQ(back.out_dir, c.out_dir);
    EXPECT_EQ(back.resume_from, c.resume_from);
    EXPECT_THROW((void)run_config_from_json(nlohmann::json::array()), std::invalid_argument);
    EXPECT_THROW((void)run_config_from_json({{"er", 5}}), std::invalid_argument);
}

TEST(OracleSpec, ParseAndPrint) {
    EXPECT_EQ(OracleSpec::parse("constant:0.25").constant, 0.25);
    EXPECT_EQ(OracleSpec::parse("planted:17").seed, 17u);
    const OracleSpec f = OracleSpec::parse("frequency:3:6");
    EXPECT_EQ(f.kind, OracleSpec::Kind::frequency);
    EXPECT_EQ(f.preferred_e, 6);
    EXPECT_EQ(OracleSpec::parse("remote").address, "");
    EXPECT_EQ(OracleSpec::parse("remote:sim.local:9000").address, "sim.local:9000");
    for (const char* s : {"planted:0", "constant:0.5", "frequency:1:5", "remote", "remote:h:1"})
        EXPECT_EQ(OracleSpec::parse(s).to_string(), s);
    for (const char* bad : {"", "planted", "planted:-1", "planted:x", "constant:2", "frequency:1",
                            "frequency:1:12", "remote:host", "remote:host:0", "magic:1"})
        EXPECT_THROW((void)OracleSpec::parse(bad), std::invalid_argument) << bad;
}

TEST(OracleSpec, FactoryAndEnvironment) {
    EXPECT_EQ(make_oracle(OracleSpec::parse("planted:2"), ErConfig{})->describe(), "planted:2 (p=4)");
    EXPECT_EQ(make_oracle(OracleSpec::parse("frequency:2:5"), ErConfig{})->describe(), "frequency:2:5");
    mosaic::testing::MockBridge bridge;
    ::setenv(kOracleAddressEnv, bridge.address().c_str(), 1);
    EXPECT_EQ(make_oracle(OracleSpec::parse("remote"), ErConfig{})->describe(), "remote:" + bridge.address());
    ::unsetenv(kOracleAddressEnv);
    EXPECT_THROW((void)make_oracle(OracleSpec::parse("remote"), ErConfig{}), std::invalid_argument);
}
