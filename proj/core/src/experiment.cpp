#include "fcgan/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace fcgan::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016" PRIx64, h);
    return out;
}

ExperimentConfig with_seed(ExperimentConfig config, std::uint64_t seed) {
    config.seeds = {seed};
    config.train.seed = seed;
    return config;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

ExperimentConfig load_run_config(const fs::path& run_dir) {
    const fs::path path = run_dir / "config.json";
    if (!fs::exists(path)) throw std::runtime_error("not a run directory (missing config.json): " + run_dir.string());
    return load_experiment_config(path);
}

fs::path final_checkpoint(const fs::path& run_dir) {
    const fs::path path = run_dir / "checkpoints" / "final.ckpt";
    if (!fs::exists(path)) throw CheckpointError("missing final checkpoint: " + path.string());
    return path;
}

std::size_t per_class_for(std::size_t total, std::size_t classes) { return (total + classes - 1) / classes; }

const data::Dataset& held_out(const data::Splits& s) { return s.test.size() > 0 ? s.test : s.validation; }

json convergence_json(const ConvergenceReport& r) {
    json epochs = json::array();
    for (const auto& e : r.smoothed) epochs.push_back({{"epoch", e.epoch}, {"source_g", e.source_g}, {"source_d", e.source_d}});
    return {{"convergence_epoch", r.convergence_epoch ? json(*r.convergence_epoch) : json(nullptr)},
            {"target_g", r.options.target_g},
            {"target_d", r.options.target_d},
            {"band_g", r.options.band_g},
            {"band_d", r.options.band_d},
            {"window", r.options.window},
            {"dwell", r.options.dwell},
            {"smoothed", epochs}};
}

ConvergenceOptions convergence_options(const EvalConfig& e) {
    return {e.target_g, e.target_d, e.band_g, e.band_d, e.window, e.dwell};
}

std::optional<double> median(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double m = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    if (!std::isfinite(m)) return std::nullopt;
    return m;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else {
        out[prefix] = j;
    }
}

json row_json(const CompareRow& r) {
    return {{"seed", r.seed},
            {"variant", to_string(r.variant)},
            {"convergence_epoch", r.convergence_epoch ? json(*r.convergence_epoch) : json(nullptr)},
            {"parzen_mean", optional_number(r.parzen_mean)},
            {"score", optional_number(r.score)}};
}

std::string csv_cell(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
}

}  // namespace

std::string library_version() { return FCGAN_VERSION; }

fs::path run_dir_for(const ExperimentConfig& config, std::uint64_t seed) {
    return config.output_dir / ("seed_" + std::to_string(seed));
}

void write_losses_csv(const std::vector<StepRecord>& history, const fs::path& path) {
    std::string text = "step,epoch,source_d,source_g,class_d,class_g,total_d,total_g\n";
    char line[256];
    for (const auto& r : history) {
        const auto& l = r.losses;
        std::snprintf(line, sizeof line, "%" PRIu64 ",%" PRIu64 ",%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.epoch,
                      l.source_d, l.source_g, l.class_d, l.class_g, l.total_d, l.total_g);
        text += line;
    }
    write_text(path, text);
}

std::vector<StepRecord> read_losses_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "step,epoch,source_d,source_g,class_d,class_g,total_d,total_g") {
        throw std::runtime_error(path.string() + ": unexpected loss CSV header");
    }
    std::vector<StepRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        StepRecord r;
        auto& l = r.losses;
        unsigned long long step = 0, epoch = 0;
        if (std::sscanf(line.c_str(), "%llu,%llu,%lf,%lf,%lf,%lf,%lf,%lf", &step, &epoch, &l.source_d, &l.source_g,
                        &l.class_d, &l.class_g, &l.total_d, &l.total_g) != 8) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        }
        r.step = step;
        r.epoch = epoch;
        out.push_back(r);
    }
    return out;
}

RunRecord train_run(const ExperimentConfig& config, std::uint64_t seed, const fs::path& run_dir,
                    const std::optional<fs::path>& resume_from) {
    const ExperimentConfig run_config = with_seed(config, seed);
    fs::create_directories(run_dir);
    const fs::path ckpt_dir = run_dir / "checkpoints";
    std::optional<Trainer> trainer;
    if (resume_from) {
        // Read before the checkpoint directory is cleared; it may live there.
        trainer.emplace(Trainer::resume(*resume_from, run_config.train));
    } else {
        trainer.emplace(run_config.train);
    }
    if (!resume_from) fs::remove_all(ckpt_dir);
    fs::create_directories(ckpt_dir);
    write_text(run_dir / "config.json", to_json(run_config));
    trainer->set_checkpoint_dir(ckpt_dir);
    try {
        trainer->run();
    } catch (const TrainingDiverged&) {
        write_losses_csv(trainer->record().history, run_dir / "losses.csv");
        throw;
    }
    const RunRecord& record = trainer->record();
    write_losses_csv(record.history, run_dir / "losses.csv");

    json timing = json::array();
    for (double s : record.epoch_seconds) timing.push_back(s);
    write_json(run_dir / "timing.json", {{"epoch_seconds", timing}});

    json checkpoints = json::array();
    for (const auto& c : record.checkpoints) checkpoints.push_back(fs::relative(c, run_dir).generic_string());
    write_json(run_dir / "manifest.json",
               {{"config_hash", config_hash(run_config.train)},
                {"seed", seed},
                {"variant", to_string(run_config.train.variant)},
                {"version", library_version()},
                {"checkpoint_format", kCheckpointVersion},
                {"steps", record.history.size()},
                {"steps_per_epoch", record.steps_per_epoch},
                {"losses_csv_fnv1a", file_hash(run_dir / "losses.csv")},
                {"checkpoints", checkpoints}});
    return record;
}

std::vector<fs::path> cmd_train(const fs::path& config_path, std::optional<std::uint64_t> seed,
                                const std::optional<fs::path>& resume_from) {
    const ExperimentConfig config = load_experiment_config(config_path);
    std::vector<std::uint64_t> seeds = seed ? std::vector<std::uint64_t>{*seed} : config.seeds;
    if (resume_from && seeds.size() != 1) throw std::invalid_argument("resume needs exactly one seed");
    std::vector<fs::path> dirs;
    for (std::uint64_t s : seeds) {
        dirs.push_back(run_dir_for(config, s));
        train_run(config, s, dirs.back(), resume_from);
    }
    return dirs;
}

Classifier train_scorer(const data::Splits& splits, const EvalConfig& eval, double* held_out_accuracy) {
    Classifier scorer = Classifier::train(splits.train, eval.scorer);
    const double acc = scorer.accuracy(held_out(splits));
    if (held_out_accuracy) *held_out_accuracy = acc;
    if (acc < eval.min_scorer_accuracy) {
        throw std::runtime_error("scorer reached only " + std::to_string(acc) + " held-out accuracy (need " +
                                 std::to_string(eval.min_scorer_accuracy) + ")");
    }
    return scorer;
}

EvalSummary cmd_eval(const fs::path& run_dir, const std::vector<Battery>& battery, const Classifier* scorer) {
    const ExperimentConfig config = load_run_config(run_dir);
    const EvalConfig& ev = config.eval;
    auto wants = [&](Battery b) { return std::find(battery.begin(), battery.end(), b) != battery.end(); };
    EvalSummary summary;

    if (wants(Battery::convergence)) {
        RunRecord record;
        record.history = read_losses_csv(run_dir / "losses.csv");
        if (record.history.empty()) throw std::runtime_error("losses.csv holds no steps");
        const auto epochs = record.epoch_source_means();
        summary.convergence = eval::convergence_epoch(epochs, convergence_options(ev));
        write_json(run_dir / "convergence.json", convergence_json(*summary.convergence));
    }
    if (!wants(Battery::parzen) && !wants(Battery::score) && !wants(Battery::grid)) return summary;

    Trainer trainer = Trainer::resume(final_checkpoint(run_dir), config.train);
    const data::Splits& splits = trainer.splits();
    Generator& generator = trainer.generator();
    const std::size_t classes = config.train.dataset.num_classes;

    if (wants(Battery::parzen)) {
        if (splits.test.size() == 0) throw data::DatasetError("parzen evaluation needs a test split");
        if (splits.validation.size() == 0) throw data::DatasetError("parzen evaluation needs a validation split");
        const data::Dataset generated =
            eval::generate_labeled(generator, per_class_for(ev.parzen_samples, classes), derive_seed(ev.seed, 10));
        const auto grid = eval::log_sigma_grid(ev.sigma_min, ev.sigma_max, ev.sigma_points);
        const auto grid_scores = eval::parzen_grid_scores(generated.inputs, splits.validation.inputs, grid);
        const double sigma = eval::parzen_fit_sigma(generated.inputs, splits.validation.inputs, grid);
        summary.parzen = eval::parzen_log_likelihood(splits.test.inputs, generated.inputs, sigma);
        json scores = json::array();
        for (std::size_t i = 0; i < grid.size(); ++i) scores.push_back({{"sigma", grid[i]}, {"validation_mean", grid_scores[i]}});
        write_json(run_dir / "parzen.json", {{"sigma", summary.parzen->sigma},
                                             {"mean_log_likelihood", summary.parzen->mean_log_likelihood},
                                             {"standard_error", summary.parzen->standard_error},
                                             {"generated_count", summary.parzen->generated_count},
                                             {"test_count", summary.parzen->test_count},
                                             {"sigma_search", scores}});
    }

    if (wants(Battery::score)) {
        std::optional<Classifier> own;
        ScoreReport r;
        if (!scorer) {
            own.emplace(train_scorer(splits, ev, &r.scorer_accuracy));
            scorer = &*own;
        } else {
            r.scorer_accuracy = scorer->accuracy(held_out(splits));
        }
        const data::Dataset samples =
            eval::generate_labeled(generator, per_class_for(ev.score_samples, classes), derive_seed(ev.seed, 11));
        r.samples = samples.size();
        r.score = eval::classifier_score(*scorer, samples.inputs);
        r.conditional_accuracy = eval::conditional_accuracy(*scorer, samples.inputs, samples.labels);
        r.real_data_score = eval::classifier_score(*scorer, held_out(splits).inputs);
        summary.score = r;
        write_json(run_dir / "score.json", {{"score", r.score},
                                            {"conditional_accuracy", r.conditional_accuracy},
                                            {"scorer_accuracy", r.scorer_accuracy},
                                            {"real_data_score", r.real_data_score},
                                            {"samples", r.samples}});
    }

    if (wants(Battery::grid)) {
        if (generator.spec().sample_shape.size() == 3) {
            summary.grid = run_dir / "grid.png";
            write_png(eval::sample_grid(generator, ev.grid_rows, ev.seed), *summary.grid);
        } else {
            summary.grid = run_dir / "grid.csv";
            eval::write_sample_scatter(generator, ev.grid_rows, ev.seed, *summary.grid);
        }
    }
    return summary;
}

CompareReport aggregate(std::vector<CompareRow> rows) {
    CompareReport report;
    report.rows = std::move(rows);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> conv[2], parzen[2], score[2];
    std::map<std::uint64_t, const CompareRow*> by_seed[2];
    for (const auto& r : report.rows) {
        const int v = r.variant == Variant::fcgan ? 0 : 1;
        conv[v].push_back(r.convergence_epoch ? static_cast<double>(*r.convergence_epoch) : inf);
        if (r.parzen_mean) parzen[v].push_back(*r.parzen_mean);
        if (r.score) score[v].push_back(*r.score);
        by_seed[v][r.seed] = &r;
    }
    report.median_convergence_fc = median(conv[0]);
    report.median_convergence_ac = median(conv[1]);
    report.median_parzen_fc = median(parzen[0]);
    report.median_parzen_ac = median(parzen[1]);
    report.median_score_fc = median(score[0]);
    report.median_score_ac = median(score[1]);
    for (const auto& [seed, fc] : by_seed[0]) {
        auto it = by_seed[1].find(seed);
        if (it == by_seed[1].end()) continue;
        const CompareRow* ac = it->second;
        ++report.seeds;
        // A win needs FC to converge; an AC run that never converges is infinitely late.
        if (fc->convergence_epoch && (!ac->convergence_epoch || *fc->convergence_epoch <= *ac->convergence_epoch)) {
            ++report.convergence_wins_fc;
        }
        if (fc->parzen_mean && ac->parzen_mean && *fc->parzen_mean >= *ac->parzen_mean) ++report.parzen_wins_fc;
        if (fc->score && ac->score && *fc->score >= *ac->score) ++report.score_wins_fc;
    }
    return report;
}

std::vector<std::string> differences_beyond_variant(const ExperimentConfig& a, const ExperimentConfig& b) {
    auto normalized = [](const ExperimentConfig& c) {
        json j = json::parse(to_json(c));
        j.erase("variant");
        j.erase("seeds");
        j.erase("output_dir");
        std::map<std::string, json> flat;
        flatten(j, "", flat);
        return flat;
    };
    const auto fa = normalized(a), fb = normalized(b);
    std::vector<std::string> diffs;
    for (const auto& [k, v] : fa) {
        auto it = fb.find(k);
        if (it == fb.end() || it->second != v) diffs.push_back(k);
    }
    return diffs;
}

CompareReport cmd_compare(const fs::path& config_path, const std::optional<fs::path>& second_config,
                          const std::vector<std::uint64_t>& seeds) {
    ExperimentConfig base = load_experiment_config(config_path);
    if (second_config) {
        const ExperimentConfig other = load_experiment_config(*second_config);
        const auto diffs = differences_beyond_variant(base, other);
        if (!diffs.empty()) {
            std::string list;
            for (const auto& d : diffs) list += (list.empty() ? "" : ", ") + d;
            throw ConfigError(diffs.front(), "configs differ beyond the model variant (" + list + ")");
        }
        if (base.train.variant == other.train.variant) {
            throw ConfigError("variant", "compare needs one fcgan and one acgan config");
        }
    }
    const std::vector<std::uint64_t> run_seeds = seeds.empty() ? base.seeds : seeds;
    const fs::path root = base.output_dir / "compare";
    fs::create_directories(root);

    const bool scoring = std::find(base.eval.battery.begin(), base.eval.battery.end(), Battery::score) != base.eval.battery.end();
    std::optional<Classifier> scorer;
    if (scoring) scorer.emplace(train_scorer(data::load_splits(base.train.dataset), base.eval));

    std::vector<CompareRow> rows;
    for (std::uint64_t seed : run_seeds) {
        for (Variant v : {Variant::fcgan, Variant::acgan}) {
            ExperimentConfig cfg = base;
            cfg.train.variant = v;
            const fs::path dir = root / to_string(v) / ("seed_" + std::to_string(seed));
            train_run(cfg, seed, dir);
            const EvalSummary s = cmd_eval(dir, base.eval.battery, scorer ? &*scorer : nullptr);
            CompareRow row;
            row.seed = seed;
            row.variant = v;
            if (s.convergence) row.convergence_epoch = s.convergence->convergence_epoch;
            if (s.parzen) row.parzen_mean = s.parzen->mean_log_likelihood;
            if (s.score) row.score = s.score->score;
            write_json(root / (to_string(v) + "_seed_" + std::to_string(seed) + ".json"), row_json(row));
            rows.push_back(row);
        }
    }

    CompareReport report = aggregate(std::move(rows));
    json table = json::array();
    std::string csv = "seed,variant,convergence_epoch,parzen_mean,score\n";
    for (const auto& r : report.rows) {
        table.push_back(row_json(r));
        csv += std::to_string(r.seed) + "," + to_string(r.variant) + "," +
               (r.convergence_epoch ? std::to_string(*r.convergence_epoch) : "") + "," + csv_cell(r.parzen_mean) + "," +
               csv_cell(r.score) + "\n";
    }
    write_json(root / "report.json",
               {{"rows", table},
                {"seeds", report.seeds},
                {"median",
                 {{"fcgan",
                   {{"convergence_epoch", optional_number(report.median_convergence_fc)},
                    {"parzen_mean", optional_number(report.median_parzen_fc)},
                    {"score", optional_number(report.median_score_fc)}}},
                  {"acgan",
                   {{"convergence_epoch", optional_number(report.median_convergence_ac)},
                    {"parzen_mean", optional_number(report.median_parzen_ac)},
                    {"score", optional_number(report.median_score_ac)}}}}},
                {"fcgan_wins",
                 {{"convergence_epoch", report.convergence_wins_fc},
                  {"parzen_mean", report.parzen_wins_fc},
                  {"score", report.score_wins_fc}}}});
    write_text(root / "report.csv", csv);
    return report;
}

fs::path cmd_sample(const fs::path& run_dir, std::size_t rows, std::optional<std::uint64_t> seed,
                    const std::optional<fs::path>& out) {
    if (rows == 0) throw std::invalid_argument("rows must be positive");
    const ExperimentConfig config = load_run_config(run_dir);
    Trainer trainer = Trainer::resume(final_checkpoint(run_dir), config.train);
    Generator& generator = trainer.generator();
    const std::uint64_t s = seed.value_or(config.eval.seed);
    const bool image = generator.spec().sample_shape.size() == 3;
    const fs::path path = out.value_or(run_dir / (image ? "samples.png" : "samples.csv"));
    if (image) {
        write_png(eval::sample_grid(generator, rows, s), path);
    } else {
        eval::write_sample_scatter(generator, rows, s, path);
    }
    return path;
}

}  // namespace fcgan::experiment
