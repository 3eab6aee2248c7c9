#include "fcgan/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fcgan {

using nlohmann::json;

namespace {

/// Typed access to one JSON object; every key must be consumed exactly once.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw ConfigError(field(key), "unknown field");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void read(const std::string& key, double& out, double lo, double hi) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(field(key), "expected a number");
            const double x = v->get<double>();
            if (!(x >= lo && x <= hi)) throw ConfigError(field(key), range_message(lo, hi));
            out = x;
        }
    }

    template <typename U>
    void read_unsigned(const std::string& key, U& out, std::uint64_t lo = 0) {
        if (const json* v = find(key)) {
            out = static_cast<U>(as_unsigned(*v, field(key), lo));
        }
    }

    void read(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    void read(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(field(key), "expected a string");
            out = v->get<std::string>();
        }
    }

    template <typename Enum, typename Parse>
    void read_enum(const std::string& key, Enum& out, Parse parse) {
        std::string text;
        if (!find_string(key, text)) return;
        try {
            out = parse(text);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(field(key), e.what());
        }
    }

    bool find_string(const std::string& key, std::string& out) {
        const json* v = find(key);
        if (!v) return false;
        if (!v->is_string()) throw ConfigError(field(key), "expected a string");
        out = v->get<std::string>();
        return true;
    }

    static std::uint64_t as_unsigned(const json& v, const std::string& where, std::uint64_t lo) {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ConfigError(where, "expected a non-negative integer");
        }
        const std::uint64_t x = v.get<std::uint64_t>();
        if (x < lo) throw ConfigError(where, "must be at least " + std::to_string(lo));
        return x;
    }

private:
    static std::string range_message(double lo, double hi) {
        std::ostringstream s;
        s << "must lie in [" << lo << ", " << hi << "]";
        return s.str();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

constexpr double kHuge = 1e300;

void read_dataset(Section& s, data::DatasetSpec& d) {
    s.read_enum("kind", d.kind, data::parse_dataset_kind);
    s.read_unsigned("num_classes", d.num_classes, 2);
    s.read_unsigned("per_class", d.per_class, 1);
    s.read_unsigned("validation_per_class", d.validation_per_class);
    s.read_unsigned("test_per_class", d.test_per_class);
    s.read("sigma", d.toy_sigma, 1e-12, kHuge);
    s.read_unsigned("data_seed", d.data_seed);
    s.read("directory", d.directory);
    s.read_unsigned("train_subset", d.train_subset);
    s.read_unsigned("validation_size", d.validation_size);
}

void read_model(Section& s, TrainConfig& c) {
    s.read_enum("architecture", c.architecture, parse_architecture);
    s.read_unsigned("noise_dim", c.noise_dim, 1);
    s.read("batch_norm", c.network.batch_norm);
    s.read("leaky_slope", c.network.leaky_slope, 0.0, 1.0);
    s.read("init_stddev", c.network.init_stddev, 1e-12, kHuge);
    s.read_unsigned("hidden", c.network.mlp_hidden, 1);
    s.read_unsigned("layers", c.network.mlp_layers, 1);
    s.read("bn_momentum", c.network.bn_momentum, 0.0, 1.0);
    s.read("bn_eps", c.network.bn_eps, 1e-300, kHuge);
}

void read_training(Section& s, TrainConfig& c) {
    s.read_unsigned("epochs", c.epochs, 1);
    s.read_unsigned("max_steps", c.max_steps);
    s.read_unsigned("batch_size", c.batch_size, 1);
    s.read("learning_rate", c.adam.learning_rate, 1e-300, kHuge);
    s.read("beta1", c.adam.beta1, 0.0, 0.999999999);
    s.read("beta2", c.adam.beta2, 0.0, 0.999999999);
    s.read("adam_epsilon", c.adam.epsilon, 1e-300, kHuge);
    s.read("label_smoothing", c.label_smoothing, 0.0, 0.999999999);
    s.read("keep_checkpoints", c.keep_checkpoints);
}

void read_eval(Section& s, EvalConfig& e) {
    if (const json* b = s.find("battery")) {
        const std::string where = s.field("battery");
        if (!b->is_array()) throw ConfigError(where, "expected a list of names");
        e.battery.clear();
        for (const json& item : *b) {
            if (!item.is_string()) throw ConfigError(where, "expected a list of names");
            try {
                e.battery.push_back(parse_battery(item.get<std::string>()));
            } catch (const std::invalid_argument& err) {
                throw ConfigError(where, err.what());
            }
        }
    }
    s.read("target_g", e.target_g, 0.0, kHuge);
    s.read("target_d", e.target_d, 0.0, kHuge);
    s.read("band_g", e.band_g, 0.0, kHuge);
    s.read("band_d", e.band_d, 0.0, kHuge);
    s.read_unsigned("window", e.window, 1);
    s.read_unsigned("dwell", e.dwell, 1);
    s.read_unsigned("parzen_samples", e.parzen_samples, 1);
    s.read("sigma_min", e.sigma_min, 1e-300, kHuge);
    s.read("sigma_max", e.sigma_max, 1e-300, kHuge);
    s.read_unsigned("sigma_points", e.sigma_points, 1);
    s.read_unsigned("score_samples", e.score_samples, 1);
    s.read_unsigned("grid_rows", e.grid_rows, 1);
    s.read_unsigned("seed", e.seed);
    s.read("min_scorer_accuracy", e.min_scorer_accuracy, 0.0, 1.0);
    if (const json* sc = s.find("scorer")) {
        Section scorer(*sc, s.field("scorer"));
        scorer.read_unsigned("epochs", e.scorer.epochs, 1);
        scorer.read_unsigned("batch_size", e.scorer.batch_size, 1);
        scorer.read("learning_rate", e.scorer.learning_rate, 1e-300, kHuge);
        scorer.read_unsigned("hidden", e.scorer.hidden, 1);
        scorer.read_unsigned("seed", e.scorer.seed);
        scorer.finish();
    }
    if (e.sigma_min > e.sigma_max) throw ConfigError(s.field("sigma_min"), "must not exceed sigma_max");
}

template <typename F>
void read_section(Section& parent, const std::string& key, F&& body) {
    if (const json* v = parent.find(key)) {
        Section child(*v, parent.field(key));
        body(child);
        child.finish();
    }
}

json dataset_json(const data::DatasetSpec& d) {
    return {{"kind", data::to_string(d.kind)},
            {"num_classes", d.num_classes},
            {"per_class", d.per_class},
            {"validation_per_class", d.validation_per_class},
            {"test_per_class", d.test_per_class},
            {"sigma", d.toy_sigma},
            {"data_seed", d.data_seed},
            {"directory", d.directory},
            {"train_subset", d.train_subset},
            {"validation_size", d.validation_size}};
}

json model_json(const TrainConfig& c) {
    return {{"architecture", to_string(c.architecture)},
            {"noise_dim", c.noise_dim},
            {"batch_norm", c.network.batch_norm},
            {"leaky_slope", c.network.leaky_slope},
            {"init_stddev", c.network.init_stddev},
            {"hidden", c.network.mlp_hidden},
            {"layers", c.network.mlp_layers},
            {"bn_momentum", c.network.bn_momentum},
            {"bn_eps", c.network.bn_eps}};
}

json training_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"max_steps", c.max_steps},
            {"batch_size", c.batch_size},
            {"learning_rate", c.adam.learning_rate},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"adam_epsilon", c.adam.epsilon},
            {"label_smoothing", c.label_smoothing},
            {"keep_checkpoints", c.keep_checkpoints}};
}

json eval_json(const EvalConfig& e) {
    json battery = json::array();
    for (Battery b : e.battery) battery.push_back(to_string(b));
    return {{"battery", battery},
            {"target_g", e.target_g},
            {"target_d", e.target_d},
            {"band_g", e.band_g},
            {"band_d", e.band_d},
            {"window", e.window},
            {"dwell", e.dwell},
            {"parzen_samples", e.parzen_samples},
            {"sigma_min", e.sigma_min},
            {"sigma_max", e.sigma_max},
            {"sigma_points", e.sigma_points},
            {"score_samples", e.score_samples},
            {"grid_rows", e.grid_rows},
            {"seed", e.seed},
            {"min_scorer_accuracy", e.min_scorer_accuracy},
            {"scorer",
             {{"epochs", e.scorer.epochs},
              {"batch_size", e.scorer.batch_size},
              {"learning_rate", e.scorer.learning_rate},
              {"hidden", e.scorer.hidden},
              {"seed", e.scorer.seed}}}};
}

json parse_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace

std::string to_string(Battery b) {
    switch (b) {
    case Battery::convergence:
        return "convergence";
    case Battery::parzen:
        return "parzen";
    case Battery::score:
        return "score";
    case Battery::grid:
        return "grid";
    }
    return "?";
}

Battery parse_battery(const std::string& s) {
    if (s == "convergence") return Battery::convergence;
    if (s == "parzen") return Battery::parzen;
    if (s == "score") return Battery::score;
    if (s == "grid") return Battery::grid;
    throw std::invalid_argument("unknown evaluation '" + s + "' (expected convergence|parzen|score|grid)");
}

std::vector<Battery> parse_battery_list(const std::string& s) {
    if (s == "all") return EvalConfig{}.battery;
    std::vector<Battery> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(parse_battery(item));
    }
    if (out.empty()) throw std::invalid_argument("empty evaluation list");
    return out;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    const json root = parse_text(json_text);
    ExperimentConfig cfg;
    Section s(root, "");
    s.read_enum("variant", cfg.train.variant, parse_variant);
    if (const json* seeds = s.find("seeds")) {
        if (!seeds->is_array() || seeds->empty()) throw ConfigError("seeds", "expected a non-empty list of integers");
        cfg.seeds.clear();
        for (const json& v : *seeds) cfg.seeds.push_back(Section::as_unsigned(v, "seeds", 0));
    }
    std::string out_dir = cfg.output_dir.string();
    s.read("output_dir", out_dir);
    if (out_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    cfg.output_dir = out_dir;
    read_section(s, "dataset", [&](Section& d) { read_dataset(d, cfg.train.dataset); });
    read_section(s, "model", [&](Section& m) { read_model(m, cfg.train); });
    read_section(s, "training", [&](Section& t) { read_training(t, cfg.train); });
    read_section(s, "eval", [&](Section& e) { read_eval(e, cfg.eval); });
    s.finish();
    cfg.train.seed = cfg.seeds.front();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_experiment_config(text.str());
}

std::string to_json(const ExperimentConfig& config) {
    json seeds = json::array();
    for (std::uint64_t s : config.seeds) seeds.push_back(s);
    const json j = {{"variant", to_string(config.train.variant)},
                    {"seeds", seeds},
                    {"output_dir", config.output_dir.string()},
                    {"dataset", dataset_json(config.train.dataset)},
                    {"model", model_json(config.train)},
                    {"training", training_json(config.train)},
                    {"eval", eval_json(config.eval)}};
    return j.dump(2) + "\n";
}

std::string train_config_to_json(const TrainConfig& config) {
    const json j = {{"variant", to_string(config.variant)},
                    {"seed", config.seed},
                    {"dataset", dataset_json(config.dataset)},
                    {"model", model_json(config)},
                    {"training", training_json(config)}};
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& json_text) {
    const json root = parse_text(json_text);
    TrainConfig c;
    Section s(root, "");
    s.read_enum("variant", c.variant, parse_variant);
    s.read_unsigned("seed", c.seed);
    read_section(s, "dataset", [&](Section& d) { read_dataset(d, c.dataset); });
    read_section(s, "model", [&](Section& m) { read_model(m, c); });
    read_section(s, "training", [&](Section& t) { read_training(t, c); });
    s.finish();
    return c;
}

std::string config_hash(const TrainConfig& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : train_config_to_json(config)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fcgan
