#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcgan/adam.hpp"
#include "fcgan/checkpoint.hpp"
#include "fcgan/data.hpp"
#include "fcgan/losses.hpp"
#include "fcgan/models.hpp"

namespace fcgan {

/// Defaults are the MNIST setup: batch 100, 100-d uniform
/// noise, Adam(2e-5, 0.5, 0.999), truncated-normal init.
struct TrainConfig {
    Variant variant = Variant::fcgan;
    data::DatasetSpec dataset;
    Architecture architecture = Architecture::conv;
    NetworkOptions network;
    std::size_t noise_dim = 100;
    std::size_t epochs = 1;
    std::size_t max_steps = 0;  // 0: run every epoch to completion
    std::size_t batch_size = 100;
    AdamConfig adam;
    std::uint64_t seed = 0;
    double label_smoothing = 0.0;  // one-sided, on the real source target
    bool keep_checkpoints = true;  // keep every epoch's checkpoint, not just the latest

    GeneratorSpec generator_spec() const;
    DiscriminatorSpec discriminator_spec() const;
};

/// Raised when a loss or gradient stops being finite. Carries the last
/// checkpoint written before the failure, if any.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, std::optional<std::filesystem::path> last_good)
        : std::runtime_error(what), last_good_checkpoint(std::move(last_good)) {}
    std::optional<std::filesystem::path> last_good_checkpoint;
};

struct EpochSourceLoss {
    std::size_t epoch = 0;
    double source_g = 0.0;
    double source_d = 0.0;
};

struct RunRecord {
    TrainConfig config;
    std::size_t steps_per_epoch = 0;
    std::vector<StepRecord> history;
    std::vector<double> epoch_seconds;  // wall clock, not reproducible
    std::vector<std::filesystem::path> checkpoints;

    std::uint64_t seed() const { return config.seed; }
    /// Means of the source losses over each completed or partial epoch.
    std::vector<EpochSourceLoss> epoch_source_means() const;
};

/// Owns both networks, their optimizers and the noise RNG of one run.
class Trainer {
public:
    explicit Trainer(TrainConfig config);
    Trainer(TrainConfig config, data::Splits splits);

    /// Restores a run from a checkpoint. Only `epochs`, `max_steps` and
    /// `keep_checkpoints` may differ from the checkpointed config.
    static Trainer resume(const std::filesystem::path& checkpoint, const TrainConfig& config);
    static Trainer resume(const std::filesystem::path& checkpoint, const TrainConfig& config, data::Splits splits);

    /// Writes `epoch_NNNN.ckpt` into `dir` after every epoch and `final.ckpt` when run() ends.
    void set_checkpoint_dir(std::filesystem::path dir);

    /// Trains until `config.epochs` (or `config.max_steps`) is reached.
    void run();
    /// One D step followed by one G step on the next batch.
    StepRecord train_step();

    /// One Adam step on D; fakes come from G without recording G.
    losses::LossBreakdown discriminator_step(const data::LabeledBatch& real, const LatentInput& latent);
    /// One Adam step on G through a frozen D.
    losses::LossBreakdown generator_step(const LatentInput& latent);

    /// Losses of D and G on one batch without any parameter update.
    losses::LossBreakdown evaluate_losses(const data::LabeledBatch& real, const LatentInput& latent);

    void save_checkpoint(const std::filesystem::path& path) const;

    const TrainConfig& config() const { return record_.config; }
    const RunRecord& record() const { return record_; }
    std::uint64_t step() const { return step_; }
    std::size_t steps_per_epoch() const { return stream_->batches_per_epoch(); }
    const data::Splits& splits() const { return *splits_; }
    Generator& generator() { return generator_; }
    Discriminator& discriminator() { return discriminator_; }
    std::mt19937_64& noise_rng() { return noise_rng_; }
    LatentInput sample_latent_batch();

private:
    void init_from_config();

    // Heap-held so the batch stream's pointer into it survives moves.
    std::shared_ptr<const data::Splits> splits_;
    RunRecord record_;
    Generator generator_;
    Discriminator discriminator_;
    Adam adam_g_;
    Adam adam_d_;
    std::mt19937_64 noise_rng_;
    std::optional<data::BatchStream> stream_;
    std::uint64_t step_ = 0;
    std::optional<std::filesystem::path> checkpoint_dir_;
};

/// Runs a full training job in memory.
RunRecord train(const TrainConfig& config);

/// Derives an independent 64-bit seed for `stream` from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fcgan
