#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcgan/classifier.hpp"
#include "fcgan/training.hpp"

namespace fcgan {

/// Schema violation; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class Battery { convergence, parzen, score, grid };

std::string to_string(Battery b);
Battery parse_battery(const std::string& s);
/// Comma-separated list; "all" selects every item.
std::vector<Battery> parse_battery_list(const std::string& s);

struct EvalConfig {
    std::vector<Battery> battery{Battery::convergence, Battery::parzen, Battery::score, Battery::grid};
    double target_g = 0.693;
    double target_d = 1.386;
    double band_g = 0.1;
    double band_d = 0.2;
    std::size_t window = 1;
    std::size_t dwell = 3;
    std::size_t parzen_samples = 10000;
    double sigma_min = 0.01;
    double sigma_max = 1.0;
    std::size_t sigma_points = 20;
    std::size_t score_samples = 1000;
    std::size_t grid_rows = 10;
    std::uint64_t seed = 1234;
    ClassifierOptions scorer;
    double min_scorer_accuracy = 0.95;
};

struct ExperimentConfig {
    TrainConfig train;  // train.seed is ignored; runs use `seeds`
    std::vector<std::uint64_t> seeds{0};
    EvalConfig eval;
    std::filesystem::path output_dir = "runs";
};

/// Validates against the schema: unknown keys, wrong types and out-of-range
/// values are rejected with the field path in the message.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& config);

/// Canonical (sorted-key) serialization of everything that shapes a run.
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& json_text);

/// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const TrainConfig& config);

}  // namespace fcgan
