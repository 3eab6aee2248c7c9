#include "fcgan/training.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "fcgan/config.hpp"

namespace fcgan {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t out[2];
    seq.generate(std::begin(out), std::end(out));
    return (std::uint64_t{out[0]} << 32) | out[1];
}

GeneratorSpec TrainConfig::generator_spec() const {
    GeneratorSpec g;
    g.arch = architecture;
    g.noise_dim = noise_dim;
    g.num_classes = dataset.num_classes;
    g.sample_shape = dataset.sample_shape();
    g.net = network;
    return g;
}

DiscriminatorSpec TrainConfig::discriminator_spec() const { return discriminator_spec_for(generator_spec(), variant); }

std::vector<EpochSourceLoss> RunRecord::epoch_source_means() const {
    std::vector<EpochSourceLoss> out;
    std::size_t count = 0;
    for (const auto& r : history) {
        if (out.empty() || out.back().epoch != r.epoch) {
            if (!out.empty()) {
                out.back().source_g /= static_cast<double>(count);
                out.back().source_d /= static_cast<double>(count);
            }
            out.push_back({r.epoch, 0.0, 0.0});
            count = 0;
        }
        out.back().source_g += r.losses.source_g;
        out.back().source_d += r.losses.source_d;
        ++count;
    }
    if (!out.empty()) {
        out.back().source_g /= static_cast<double>(count);
        out.back().source_d /= static_cast<double>(count);
    }
    return out;
}

namespace {

enum : std::uint64_t { kGeneratorInit = 1, kDiscriminatorInit = 2, kNoise = 3, kBatchOrder = 4 };

void assign(ParameterSet& dst, const ParameterSet& src, const std::string& group) {
    if (dst.size() != src.size()) throw CheckpointError("checkpoint group '" + group + "' has the wrong parameter count");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst.entries()[i].name != src.entries()[i].name) {
            throw CheckpointError("checkpoint group '" + group + "': expected '" + dst.entries()[i].name + "', found '" +
                                  src.entries()[i].name + "'");
        }
        dst.set(i, src.entries()[i].value);
    }
}

const ParameterSet& group_of(const CheckpointData& data, const std::string& name) {
    auto it = data.groups.find(name);
    if (it == data.groups.end()) throw CheckpointError("checkpoint lacks group '" + name + "'");
    return it->second;
}

std::uint64_t counter_of(const CheckpointData& data, const std::string& name) {
    auto it = data.counters.find(name);
    if (it == data.counters.end()) throw CheckpointError("checkpoint lacks counter '" + name + "'");
    return it->second;
}

TrainConfig run_length_neutral(TrainConfig c) {
    c.epochs = 0;
    c.max_steps = 0;
    c.keep_checkpoints = true;
    return c;
}

}  // namespace

Trainer::Trainer(TrainConfig config) : Trainer(config, data::load_splits(config.dataset)) {}

Trainer::Trainer(TrainConfig config, data::Splits splits)
    : splits_(std::make_shared<const data::Splits>(std::move(splits))),
      generator_(config.generator_spec(), derive_seed(config.seed, kGeneratorInit)),
      discriminator_(config.discriminator_spec(), derive_seed(config.seed, kDiscriminatorInit)),
      adam_g_(generator_.parameters(), config.adam),
      adam_d_(discriminator_.parameters(), config.adam),
      noise_rng_(derive_seed(config.seed, kNoise)) {
    if (splits_->train.size() == 0) throw std::invalid_argument("training split is empty");
    if (splits_->train.num_classes != config.dataset.num_classes) {
        throw std::invalid_argument("dataset has " + std::to_string(splits_->train.num_classes) +
                                    " classes, config says " + std::to_string(config.dataset.num_classes));
    }
    if (splits_->train.sample_shape() != config.dataset.sample_shape()) {
        throw std::invalid_argument("dataset sample shape " + shape_string(splits_->train.sample_shape()) +
                                    " does not match " + shape_string(config.dataset.sample_shape()));
    }
    if (config.label_smoothing < 0.0 || config.label_smoothing >= 1.0) {
        throw std::invalid_argument("label_smoothing must lie in [0,1)");
    }
    record_.config = std::move(config);
    stream_.emplace(splits_->train, record_.config.batch_size, derive_seed(record_.config.seed, kBatchOrder));
    record_.steps_per_epoch = stream_->batches_per_epoch();
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint, const TrainConfig& config) {
    return resume(checkpoint, config, data::load_splits(config.dataset));
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint, const TrainConfig& config, data::Splits splits) {
    CheckpointData data = read_checkpoint(checkpoint);
    const TrainConfig saved = train_config_from_json(data.config_json);
    if (train_config_to_json(run_length_neutral(saved)) != train_config_to_json(run_length_neutral(config))) {
        throw CheckpointError("resume: configuration differs from the checkpointed run (only epochs, max_steps and "
                              "keep_checkpoints may change)");
    }
    Trainer t(config, std::move(splits));
    assign(t.generator_.parameters(), group_of(data, "generator"), "generator");
    assign(t.generator_.buffers(), group_of(data, "generator.buffers"), "generator.buffers");
    assign(t.discriminator_.parameters(), group_of(data, "discriminator"), "discriminator");
    assign(t.discriminator_.buffers(), group_of(data, "discriminator.buffers"), "discriminator.buffers");
    t.adam_g_.restore(counter_of(data, "adam_g.t"), group_of(data, "adam_g.m"), group_of(data, "adam_g.v"));
    t.adam_d_.restore(counter_of(data, "adam_d.t"), group_of(data, "adam_d.m"), group_of(data, "adam_d.v"));
    std::istringstream rng_state(data.rng_state);
    rng_state >> t.noise_rng_;
    if (!rng_state) throw CheckpointError("resume: unreadable RNG state");
    if (data.history.size() != data.step) throw CheckpointError("resume: loss history does not match the step counter");
    t.step_ = data.step;
    t.record_.history = std::move(data.history);
    return t;
}

void Trainer::set_checkpoint_dir(std::filesystem::path dir) {
    std::filesystem::create_directories(dir);
    checkpoint_dir_ = std::move(dir);
}

LatentInput Trainer::sample_latent_batch() {
    return sample_latent(record_.config.batch_size, record_.config.noise_dim, record_.config.dataset.num_classes,
                         noise_rng_);
}

losses::LossBreakdown Trainer::discriminator_step(const data::LabeledBatch& real, const LatentInput& latent) {
    const std::size_t b = real.labels.size();
    if (latent.labels.size() != b) throw std::invalid_argument("discriminator_step: real and fake batch sizes differ");
    Tape tape;
    BoundParameters gp(tape, generator_.parameters(), false);
    Var fake = generator_.forward(gp, tape.constant(latent.z), latent.labels, RunMode{true, false});
    BoundParameters dp(tape, discriminator_.parameters(), true);
    // Real and fake batches are normalized separately, as D sees fakes alone in the G step.
    auto on_real = discriminator_.forward(dp, tape.constant(real.inputs), RunMode{true, true});
    auto on_fake = discriminator_.forward(dp, fake, RunMode{true, true});
    Var p_real = on_real.p_source, c_real = on_real.class_probs;
    Var p_fake = on_fake.p_source, c_fake = on_fake.class_probs;

    Var source = losses::source_loss_d(p_real, p_fake, 1.0 - record_.config.label_smoothing);
    Var cls = record_.config.variant == Variant::fcgan
                  ? losses::class_loss_d_fcgan(c_real, real.labels, c_fake)
                  : losses::class_loss_acgan(c_real, real.labels, c_fake, latent.labels).d_term;
    Var total = ops::add(source, cls);
    adam_d_.step(discriminator_.parameters(), dp.gradients(tape.backward(total)));
    return losses::total_losses(source.value().item(), 0.0, cls.value().item(), 0.0);
}

losses::LossBreakdown Trainer::generator_step(const LatentInput& latent) {
    Tape tape;
    BoundParameters gp(tape, generator_.parameters(), true);
    Var fake = generator_.forward(gp, tape.constant(latent.z), latent.labels, RunMode{true, true});
    BoundParameters dp(tape, discriminator_.parameters(), false);
    auto out = discriminator_.forward(dp, fake, RunMode{true, false});
    Var source = losses::source_loss_g(out.p_source);
    Var cls = record_.config.variant == Variant::fcgan ? losses::class_loss_g_fcgan(out.class_probs, latent.labels)
                                                       : losses::class_loss_g_acgan(out.class_probs, latent.labels);
    Var total = ops::add(source, cls);
    adam_g_.step(generator_.parameters(), gp.gradients(tape.backward(total)));
    return losses::total_losses(0.0, source.value().item(), 0.0, cls.value().item());
}

losses::LossBreakdown Trainer::evaluate_losses(const data::LabeledBatch& real, const LatentInput& latent) {
    Tape tape;
    BoundParameters gp(tape, generator_.parameters(), false);
    BoundParameters dp(tape, discriminator_.parameters(), false);
    Var fake = generator_.forward(gp, tape.constant(latent.z), latent.labels, RunMode{true, false});
    auto on_real = discriminator_.forward(dp, tape.constant(real.inputs), RunMode{true, false});
    auto on_fake = discriminator_.forward(dp, fake, RunMode{true, false});
    Var p_real = on_real.p_source, c_real = on_real.class_probs;
    Var p_fake = on_fake.p_source, c_fake = on_fake.class_probs;
    const bool fc = record_.config.variant == Variant::fcgan;
    const double source_d = losses::source_loss_d(p_real, p_fake).value().item();
    const double source_g = losses::source_loss_g(p_fake).value().item();
    const double class_d = fc ? losses::class_loss_d_fcgan(c_real, real.labels, c_fake).value().item()
                              : losses::class_loss_acgan(c_real, real.labels, c_fake, latent.labels).d_term.value().item();
    const double class_g = fc ? losses::class_loss_g_fcgan(c_fake, latent.labels).value().item()
                              : losses::class_loss_g_acgan(c_fake, latent.labels).value().item();
    return losses::total_losses(source_d, source_g, class_d, class_g);
}

StepRecord Trainer::train_step() {
    const std::size_t spe = stream_->batches_per_epoch();
    const std::size_t epoch = step_ / spe;
    const data::LabeledBatch real = stream_->batch(epoch, step_ % spe);
    const LatentInput d_latent = sample_latent_batch();
    const auto d = discriminator_step(real, d_latent);
    const LatentInput g_latent = sample_latent_batch();
    const auto g = generator_step(g_latent);
    StepRecord rec{step_ + 1, epoch + 1, losses::total_losses(d.source_d, g.source_g, d.class_d, g.class_g)};
    ++step_;
    record_.history.push_back(rec);
    return rec;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    CheckpointData data;
    data.config_json = train_config_to_json(record_.config);
    data.step = step_;
    std::ostringstream rng_state;
    rng_state << noise_rng_;
    data.rng_state = rng_state.str();
    data.groups["generator"] = generator_.parameters();
    data.groups["generator.buffers"] = generator_.buffers();
    data.groups["discriminator"] = discriminator_.parameters();
    data.groups["discriminator.buffers"] = discriminator_.buffers();
    data.groups["adam_g.m"] = adam_g_.first_moment();
    data.groups["adam_g.v"] = adam_g_.second_moment();
    data.groups["adam_d.m"] = adam_d_.first_moment();
    data.groups["adam_d.v"] = adam_d_.second_moment();
    data.counters["adam_g.t"] = adam_g_.steps();
    data.counters["adam_d.t"] = adam_d_.steps();
    data.history = record_.history;
    write_checkpoint(path, data);
}

void Trainer::run() {
    const std::size_t spe = stream_->batches_per_epoch();
    std::uint64_t target = static_cast<std::uint64_t>(record_.config.epochs) * spe;
    if (record_.config.max_steps > 0) target = std::min<std::uint64_t>(target, record_.config.max_steps);

    std::optional<std::filesystem::path> last_good =
        record_.checkpoints.empty() ? std::nullopt : std::optional(record_.checkpoints.back());
    auto epoch_start = std::chrono::steady_clock::now();
    while (step_ < target) {
        try {
            train_step();
        } catch (const NonFiniteError& e) {
            throw TrainingDiverged("training diverged at step " + std::to_string(step_ + 1) + ": " + e.what(), last_good);
        }
        if (step_ % spe != 0) continue;

        const auto now = std::chrono::steady_clock::now();
        record_.epoch_seconds.push_back(std::chrono::duration<double>(now - epoch_start).count());
        epoch_start = now;
        if (checkpoint_dir_) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%04llu.ckpt", static_cast<unsigned long long>(step_ / spe));
            const auto path = *checkpoint_dir_ / name;
            save_checkpoint(path);
            if (!record_.config.keep_checkpoints && last_good && *last_good != path) {
                std::filesystem::remove(*last_good);
                std::erase(record_.checkpoints, *last_good);
            }
            record_.checkpoints.push_back(path);
            last_good = path;
        }
    }
    if (checkpoint_dir_) {
        const auto path = *checkpoint_dir_ / "final.ckpt";
        save_checkpoint(path);
        record_.checkpoints.push_back(path);
    }
}

RunRecord train(const TrainConfig& config) {
    Trainer t(config);
    t.run();
    return t.record();
}

}  // namespace fcgan
