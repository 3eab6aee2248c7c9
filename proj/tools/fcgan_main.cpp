// fcgan: train, evaluate, compare and sample conditional GAN runs.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "fcgan/experiment.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
namespace ex = fcgan::experiment;

enum Exit { kOk = 0, kUsage = 2, kConfig = 3, kData = 4, kCheckpoint = 5, kDiverged = 6, kFailure = 1 };

int report(const char* kind, const std::string& message, int code, json extra = json::object()) {
    extra["error"] = kind;
    extra["message"] = message;
    std::cerr << extra.dump() << "\n";
    return code;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional GAN experiments with a fake-class auxiliary classifier"};
    app.require_subcommand(1);

    std::string train_config;
    std::optional<std::uint64_t> train_seed;
    std::optional<std::string> resume;
    auto* train = app.add_subcommand("train", "Train every seed of a config (or just --seed)");
    train->add_option("config", train_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--seed", train_seed, "Train only this seed");
    train->add_option("--resume", resume, "Continue from this checkpoint")->check(CLI::ExistingFile);

    std::string eval_dir, battery = "all";
    auto* eval = app.add_subcommand("eval", "Evaluate a finished run");
    eval->add_option("run_dir", eval_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--battery", battery, "Comma list of convergence,parzen,score,grid or 'all'");

    std::string cmp_config;
    std::optional<std::string> cmp_second;
    std::vector<std::uint64_t> cmp_seeds;
    auto* compare = app.add_subcommand("compare", "Train and evaluate fcgan against acgan per seed");
    compare->add_option("config", cmp_config, "Experiment config")->required()->check(CLI::ExistingFile);
    compare->add_option("config_ac", cmp_second, "Second config differing only in variant")->check(CLI::ExistingFile);
    compare->add_option("--seeds", cmp_seeds, "Seeds (default: the config's list)")->delimiter(',');

    std::string sample_dir;
    std::size_t rows = 10;
    std::optional<std::uint64_t> sample_seed;
    std::optional<std::string> sample_out;
    auto* sample = app.add_subcommand("sample", "Write a per-class sample grid from a run");
    sample->add_option("run_dir", sample_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    sample->add_option("--rows", rows, "Samples per class")->check(CLI::PositiveNumber);
    sample->add_option("--seed", sample_seed, "Noise seed (default: the run's eval seed)");
    sample->add_option("--out", sample_out, "Output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("usage", e.what(), kUsage);
    }

    try {
        if (*train) {
            std::optional<fs::path> from;
            if (resume) from = *resume;
            json dirs = json::array();
            for (const auto& d : ex::cmd_train(train_config, train_seed, from)) dirs.push_back(d.string());
            print({{"runs", dirs}});
        } else if (*eval) {
            const auto s = ex::cmd_eval(eval_dir, fcgan::parse_battery_list(battery));
            json out = json::object();
            if (s.convergence) {
                out["convergence_epoch"] = s.convergence->convergence_epoch ? json(*s.convergence->convergence_epoch) : json(nullptr);
            }
            if (s.parzen) out["parzen"] = {{"sigma", s.parzen->sigma}, {"mean", s.parzen->mean_log_likelihood}, {"se", s.parzen->standard_error}};
            if (s.score) out["score"] = {{"score", s.score->score}, {"conditional_accuracy", s.score->conditional_accuracy}};
            if (s.grid) out["grid"] = s.grid->string();
            print(out);
        } else if (*compare) {
            std::optional<fs::path> second;
            if (cmp_second) second = *cmp_second;
            const auto r = ex::cmd_compare(cmp_config, second, cmp_seeds);
            print({{"seeds", r.seeds},
                   {"median_convergence_epoch", {{"fcgan", opt(r.median_convergence_fc)}, {"acgan", opt(r.median_convergence_ac)}}},
                   {"fcgan_wins", {{"convergence_epoch", r.convergence_wins_fc}, {"parzen_mean", r.parzen_wins_fc}, {"score", r.score_wins_fc}}}});
        } else if (*sample) {
            std::optional<fs::path> out;
            if (sample_out) out = *sample_out;
            print({{"samples", ex::cmd_sample(sample_dir, rows, sample_seed, out).string()}});
        }
    } catch (const fcgan::ConfigError& e) {
        return report("config", e.what(), kConfig, {{"field", e.field()}});
    } catch (const fcgan::data::DatasetError& e) {
        return report("dataset", e.what(), kData);
    } catch (const fcgan::CheckpointError& e) {
        return report("checkpoint", e.what(), kCheckpoint);
    } catch (const fcgan::TrainingDiverged& e) {
        json extra = json::object();
        extra["last_good_checkpoint"] = e.last_good_checkpoint ? json(e.last_good_checkpoint->string()) : json(nullptr);
        return report("diverged", e.what(), kDiverged, extra);
    } catch (const std::invalid_argument& e) {
        return report("invalid_argument", e.what(), kUsage);
    } catch (const std::exception& e) {
        return report("failure", e.what(), kFailure);
    }
    return kOk;
}
