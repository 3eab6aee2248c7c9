#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fcgan/experiment.hpp"
#include "json.hpp"

namespace fcgan::experiment {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// A toy experiment small enough to train in well under a second per seed.
json tiny_config(const fs::path& out, const std::string& variant = "fcgan") {
    return {{"variant", variant},
            {"seeds", {0, 1}},
            {"output_dir", out.string()},
            {"dataset",
             {{"kind", "toy2d"}, {"num_classes", 3}, {"per_class", 100}, {"validation_per_class", 50},
              {"test_per_class", 100}}},
            {"model", {{"architecture", "mlp"}, {"init_stddev", 0.2}, {"hidden", 32}}},
            {"training", {{"epochs", 3}, {"batch_size", 50}, {"learning_rate", 1e-3}}},
            {"eval",
             {{"parzen_samples", 300},
              {"score_samples", 150},
              {"grid_rows", 4},
              {"sigma_points", 5},
              {"dwell", 1},
              {"scorer", {{"epochs", 20}, {"batch_size", 30}, {"hidden", 16}}}}}};
}

class Harness : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() / ("fcgan_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path write_config(const json& j, const std::string& name = "config.json") const {
        const fs::path p = root_ / name;
        std::ofstream(p) << j.dump(2);
        return p;
    }

    fs::path root_;
};

TEST_F(Harness, UnknownVariantNamesTheField) {
    json j = tiny_config(root_);
    j["variant"] = "cgan";
    try {
        parse_experiment_config(j.dump());
        FAIL() << "accepted an unknown variant";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "variant");
    }
}

TEST_F(Harness, UnknownKeysAreRejected) {
    json j = tiny_config(root_);
    j["training"]["learnign_rate"] = 1e-3;
    try {
        parse_experiment_config(j.dump());
        FAIL() << "accepted a misspelled key";
    } catch (const ConfigError& e) {
        EXPECT_NE(e.field().find("learnign_rate"), std::string::npos) << e.field();
    }
    EXPECT_THROW(parse_experiment_config("{not json"), ConfigError);
    json bad_type = tiny_config(root_);
    bad_type["training"]["batch_size"] = "fifty";
    EXPECT_THROW(parse_experiment_config(bad_type.dump()), ConfigError);
}

TEST_F(Harness, ConfigRoundTripsThroughJson) {
    const ExperimentConfig a = parse_experiment_config(tiny_config(root_).dump());
    const ExperimentConfig b = parse_experiment_config(to_json(a));
    EXPECT_EQ(to_json(a), to_json(b));
    EXPECT_EQ(config_hash(a.train), config_hash(b.train));
    EXPECT_EQ(config_hash(a.train).size(), 16u);
    ExperimentConfig c = a;
    c.train.batch_size = 60;
    EXPECT_NE(config_hash(a.train), config_hash(c.train));
    EXPECT_EQ(a.train.seed, 0u);
    EXPECT_EQ(a.eval.battery.size(), 4u);
}

TEST_F(Harness, BatteryListParsing) {
    EXPECT_EQ(parse_battery_list("all").size(), 4u);
    EXPECT_EQ(parse_battery_list("parzen,grid"), (std::vector<Battery>{Battery::parzen, Battery::grid}));
    EXPECT_THROW(parse_battery_list("fid"), std::invalid_argument);
}

TEST_F(Harness, TrainWritesArtifactsAndRerunsIdentically) {
    const fs::path cfg = write_config(tiny_config(root_ / "runs"));
    const auto dirs = cmd_train(cfg, std::uint64_t{1});
    ASSERT_EQ(dirs.size(), 1u);
    const fs::path run = dirs[0];
    EXPECT_EQ(run, root_ / "runs" / "seed_1");
    for (const char* f : {"config.json", "manifest.json", "losses.csv", "timing.json", "checkpoints/epoch_0001.ckpt",
                          "checkpoints/epoch_0003.ckpt", "checkpoints/final.ckpt"}) {
        EXPECT_TRUE(fs::exists(run / f)) << f;
    }
    const json manifest = json::parse(slurp(run / "manifest.json"));
    EXPECT_EQ(manifest["seed"], 1);
    EXPECT_EQ(manifest["variant"], "fcgan");
    EXPECT_EQ(manifest["steps"], 18);
    EXPECT_EQ(manifest["steps_per_epoch"], 6);
    EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
    EXPECT_EQ(manifest["version"], library_version());

    const auto history = read_losses_csv(run / "losses.csv");
    ASSERT_EQ(history.size(), 18u);
    EXPECT_EQ(history.back().epoch, 3u);

    const std::string losses = slurp(run / "losses.csv"), man = slurp(run / "manifest.json");
    const std::string final_ckpt = slurp(run / "checkpoints/final.ckpt");
    cmd_train(cfg, std::uint64_t{1});
    EXPECT_EQ(slurp(run / "losses.csv"), losses);
    EXPECT_EQ(slurp(run / "manifest.json"), man);
    EXPECT_TRUE(slurp(run / "checkpoints/final.ckpt") == final_ckpt);
}

TEST_F(Harness, ResumedRunMatchesStraightRun) {
    json j = tiny_config(root_ / "short");
    j["training"]["epochs"] = 2;
    const auto short_dir = cmd_train(write_config(j, "short.json"), std::uint64_t{0})[0];
    json full = tiny_config(root_ / "full");
    const fs::path full_cfg = write_config(full, "full.json");
    const auto straight = cmd_train(full_cfg, std::uint64_t{0})[0];
    full["output_dir"] = (root_ / "resumed").string();
    const auto resumed = cmd_train(write_config(full, "resumed.json"), std::uint64_t{0},
                                   short_dir / "checkpoints" / "epoch_0002.ckpt")[0];
    EXPECT_EQ(slurp(straight / "losses.csv"), slurp(resumed / "losses.csv"));
    EXPECT_TRUE(slurp(straight / "checkpoints/final.ckpt") == slurp(resumed / "checkpoints/final.ckpt"));
}

TEST_F(Harness, LossesCsvRoundTripsExactly) {
    std::vector<StepRecord> h;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        h.push_back({s, (s + 1) / 2, losses::total_losses(0.1 * s + 1.0 / 3, 0.7 / s, std::exp(-double(s)), 1e-300)});
    }
    write_losses_csv(h, root_ / "l.csv");
    const auto back = read_losses_csv(root_ / "l.csv");
    ASSERT_EQ(back.size(), h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        EXPECT_EQ(back[i].step, h[i].step);
        EXPECT_EQ(back[i].epoch, h[i].epoch);
        EXPECT_EQ(back[i].losses.source_d, h[i].losses.source_d);
        EXPECT_EQ(back[i].losses.class_g, h[i].losses.class_g);
        EXPECT_EQ(back[i].losses.total_d, h[i].losses.total_d);
    }
}

TEST_F(Harness, ConvergenceNeedsOnlyTheLossCurve) {
    const fs::path run = root_ / "synthetic";
    fs::create_directories(run);
    std::ofstream(run / "config.json") << tiny_config(root_).dump();
    std::vector<StepRecord> h;
    std::uint64_t step = 0;
    for (std::uint64_t epoch = 1; epoch <= 30; ++epoch) {
        for (int k = 0; k < 6; ++k) {
            const bool in = epoch >= 13;
            h.push_back({++step, epoch, losses::total_losses(in ? 1.39 : 0.4, in ? 0.70 : 2.0, 1.0, 1.0)});
        }
    }
    write_losses_csv(h, run / "losses.csv");
    const EvalSummary s = cmd_eval(run, {Battery::convergence});
    ASSERT_TRUE(s.convergence.has_value());
    EXPECT_EQ(s.convergence->convergence_epoch, 13u);
    const json written = json::parse(slurp(run / "convergence.json"));
    EXPECT_EQ(written["convergence_epoch"], 13);
    EXPECT_THROW(cmd_eval(run, {Battery::grid}), CheckpointError);
}

TEST_F(Harness, ParzenWithoutTestSplitIsAnError) {
    json j = tiny_config(root_ / "runs");
    j["dataset"]["test_per_class"] = 0;
    const auto run = cmd_train(write_config(j), std::uint64_t{0})[0];
    EXPECT_THROW(cmd_eval(run, {Battery::parzen}), data::DatasetError);
}

TEST_F(Harness, FullBatteryWritesEveryArtifact) {
    const auto run = cmd_train(write_config(tiny_config(root_ / "runs")), std::uint64_t{0})[0];
    const EvalSummary s = cmd_eval(run, parse_battery_list("all"));
    for (const char* f : {"convergence.json", "parzen.json", "score.json", "grid.csv"}) EXPECT_TRUE(fs::exists(run / f)) << f;
    ASSERT_TRUE(s.parzen && s.score && s.grid);
    EXPECT_EQ(s.parzen->generated_count, 300u);
    EXPECT_EQ(s.parzen->test_count, 300u);
    EXPECT_GE(s.score->score, 1.0);
    EXPECT_LE(s.score->score, 3.0);
    EXPECT_GE(s.score->scorer_accuracy, 0.95);
    const json parzen = json::parse(slurp(run / "parzen.json"));
    EXPECT_TRUE(parzen.contains("sigma_search"));
    const auto grid = data::read_toy_csv(run / "grid.csv", 3);
    EXPECT_EQ(grid.size(), 12u);

    const fs::path sample = cmd_sample(run, 5, std::uint64_t{3});
    EXPECT_EQ(data::read_toy_csv(sample, 3).size(), 15u);
}

TEST_F(Harness, CompareAggregatesFiveSeeds) {
    const fs::path cfg = write_config(tiny_config(root_ / "runs"));
    const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    const CompareReport r = cmd_compare(cfg, std::nullopt, seeds);
    EXPECT_EQ(r.seeds, 5u);
    ASSERT_EQ(r.rows.size(), 10u);
    const fs::path root = root_ / "runs" / "compare";
    EXPECT_TRUE(fs::exists(root / "report.json"));
    EXPECT_TRUE(fs::exists(root / "report.csv"));
    EXPECT_TRUE(fs::exists(root / "fcgan_seed_4.json"));
    EXPECT_TRUE(fs::exists(root / "acgan" / "seed_2" / "losses.csv"));

    std::vector<double> fc_parzen, ac_parzen;
    std::size_t fc_rows = 0;
    for (const auto& row : r.rows) {
        ASSERT_TRUE(row.parzen_mean.has_value());
        (row.variant == Variant::fcgan ? fc_parzen : ac_parzen).push_back(*row.parzen_mean);
        fc_rows += row.variant == Variant::fcgan;
    }
    EXPECT_EQ(fc_rows, 5u);
    std::sort(fc_parzen.begin(), fc_parzen.end());
    std::sort(ac_parzen.begin(), ac_parzen.end());
    EXPECT_EQ(r.median_parzen_fc, fc_parzen[2]);
    EXPECT_EQ(r.median_parzen_ac, ac_parzen[2]);
    const json report = json::parse(slurp(root / "report.json"));
    EXPECT_EQ(report["rows"].size(), 10u);
    EXPECT_EQ(report["median"]["fcgan"]["parzen_mean"].get<double>(), fc_parzen[2]);
}

TEST_F(Harness, CompareRejectsConfigsDifferingBeyondVariant) {
    const fs::path fc = write_config(tiny_config(root_ / "runs"), "fc.json");
    json ac = tiny_config(root_ / "runs", "acgan");
    ac["training"]["batch_size"] = 60;
    try {
        cmd_compare(fc, write_config(ac, "ac.json"), {0});
        FAIL() << "accepted mismatched configs";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "training.batch_size");
    }
    EXPECT_THROW(cmd_compare(fc, fc, {0}), ConfigError);
}

TEST(Aggregate, NeverConvergingRunsCountAsLate) {
    std::vector<CompareRow> rows;
    const std::optional<std::size_t> fc[] = {3, 5, std::nullopt, 4, 9};
    const std::optional<std::size_t> ac[] = {4, std::nullopt, 5, std::nullopt, std::nullopt};
    for (std::uint64_t s = 0; s < 5; ++s) {
        rows.push_back({s, Variant::fcgan, fc[s], 1.0 * s, 2.0});
        rows.push_back({s, Variant::acgan, ac[s], 0.5 * s, 2.0});
    }
    const CompareReport r = aggregate(rows);
    EXPECT_EQ(r.seeds, 5u);
    EXPECT_EQ(r.median_convergence_fc, 5.0);   // 3 4 5 9 inf
    EXPECT_FALSE(r.median_convergence_ac.has_value());  // 4 5 inf inf inf
    EXPECT_EQ(r.convergence_wins_fc, 4u);      // seed 2: FC never converged, AC did
    EXPECT_EQ(r.parzen_wins_fc, 5u);
    EXPECT_EQ(r.score_wins_fc, 5u);
    EXPECT_EQ(r.median_parzen_fc, 2.0);
}

TEST(Aggregate, DifferencesIgnoreVariantAndSeeds) {
    ExperimentConfig a, b;
    b.train.variant = Variant::acgan;
    b.seeds = {4, 5};
    b.output_dir = "elsewhere";
    EXPECT_TRUE(differences_beyond_variant(a, b).empty());
    b.train.adam.beta1 = 0.9;
    b.eval.grid_rows = 3;
    const auto d = differences_beyond_variant(a, b);
    EXPECT_EQ(d.size(), 2u);
}

#ifdef FCGAN_CLI_PATH
struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
    const std::string cmd = std::string(FCGAN_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

TEST_F(Harness, CliReportsErrorsAsJsonWithExitCodes) {
    json bad = tiny_config(root_ / "runs");
    bad["variant"] = "cgan";
    const auto config_err = run_cli("train " + write_config(bad, "bad.json").string(), root_);
    EXPECT_EQ(config_err.code, 3);
    const json e = json::parse(config_err.err);
    EXPECT_EQ(e["error"], "config");
    EXPECT_EQ(e["field"], "variant");

    EXPECT_EQ(run_cli("frobnicate", root_).code, 2);
    EXPECT_EQ(json::parse(run_cli("frobnicate", root_).err)["error"], "usage");

    json no_test = tiny_config(root_ / "runs");
    no_test["dataset"]["test_per_class"] = 0;
    const auto trained = run_cli("train " + write_config(no_test, "nt.json").string() + " --seed 0", root_);
    ASSERT_EQ(trained.code, 0) << trained.err;
    const json runs = json::parse(trained.out)["runs"];
    ASSERT_EQ(runs.size(), 1u);
    const auto parzen = run_cli("eval " + runs[0].get<std::string>() + " --battery parzen", root_);
    EXPECT_EQ(parzen.code, 4);
    EXPECT_EQ(json::parse(parzen.err)["error"], "dataset");

    fs::remove(fs::path(runs[0].get<std::string>()) / "checkpoints" / "final.ckpt");
    const auto missing = run_cli("sample " + runs[0].get<std::string>(), root_);
    EXPECT_EQ(missing.code, 5);
    EXPECT_EQ(json::parse(missing.err)["error"], "checkpoint");
}

TEST_F(Harness, CliEvalPrintsJsonResults) {
    const fs::path cfg = write_config(tiny_config(root_ / "runs"));
    ASSERT_EQ(run_cli("train " + cfg.string() + " --seed 0", root_).code, 0);
    const auto r = run_cli("eval " + (root_ / "runs" / "seed_0").string() + " --battery convergence,score", root_);
    ASSERT_EQ(r.code, 0) << r.err;
    const json out = json::parse(r.out);
    EXPECT_TRUE(out.contains("convergence_epoch"));
    EXPECT_TRUE(out.contains("score"));
    EXPECT_FALSE(out.contains("parzen"));
}

#endif  // FCGAN_CLI_PATH

}  // namespace
}  // namespace fcgan::experiment
