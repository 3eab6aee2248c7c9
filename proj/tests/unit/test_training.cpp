#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fcgan/training.hpp"
#include "gradient_suite.hpp"

namespace fcgan {
namespace {

namespace fs = std::filesystem;

/// The toy setup both variants train with: small MLPs on three clusters.
TrainConfig toy_config(Variant variant, std::size_t per_class = 1000) {
    TrainConfig c;
    c.variant = variant;
    c.dataset.kind = data::DatasetKind::toy2d;
    c.dataset.num_classes = 3;
    c.dataset.per_class = per_class;
    c.dataset.validation_per_class = 0;
    c.dataset.test_per_class = 0;
    c.architecture = Architecture::mlp;
    c.network.init_stddev = 0.2;
    c.adam.learning_rate = 1e-3;
    c.batch_size = 50;
    c.seed = 7;
    return c;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fcgan_training_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

/// Uniform pixels in [-1,1] with balanced labels, shaped like MNIST.
data::Splits mnist_like(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 10);
    data::Splits s;
    s.train = {testing::random_tensor({n, 1, 28, 28}, rng), labels, 10};
    return s;
}

bool same_history(const std::vector<StepRecord>& a, const std::vector<StepRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto &x = a[i].losses, &y = b[i].losses;
        if (a[i].step != b[i].step || a[i].epoch != b[i].epoch || x.source_d != y.source_d ||
            x.source_g != y.source_g || x.class_d != y.class_d || x.class_g != y.class_g) {
            return false;
        }
    }
    return true;
}

TEST(Training, ToyRunStaysFinite) {
    TrainConfig c = toy_config(Variant::fcgan);
    c.epochs = 100;
    c.max_steps = 2000;
    const RunRecord r = train(c);
    ASSERT_EQ(r.history.size(), 2000u);
    EXPECT_EQ(r.steps_per_epoch, 60u);
    EXPECT_EQ(r.history.back().epoch, 34u);
    for (const auto& s : r.history) {
        ASSERT_TRUE(std::isfinite(s.losses.total_d) && std::isfinite(s.losses.total_g)) << "step " << s.step;
        ASSERT_GE(s.losses.total_d, 0.0);
        ASSERT_GE(s.losses.total_g, 0.0);
    }
}

TEST(Training, LossesAreSumsOfTheirParts) {
    TrainConfig c = toy_config(Variant::acgan, 100);
    c.epochs = 3;
    for (const auto& s : train(c).history) {
        EXPECT_EQ(s.losses.total_d, s.losses.source_d + s.losses.class_d);
        EXPECT_EQ(s.losses.total_g, s.losses.source_g + s.losses.class_g);
    }
}

// With their initial running statistics the heads are near uniform. Batch
// statistics rescale D's last features to unit variance and the heads peak.
TEST(Training, UntrainedConvLossesSitAtChance) {
    TrainConfig c;
    c.dataset.kind = data::DatasetKind::mnist;
    c.dataset.num_classes = 10;
    double source_d = 0, class_d = 0;
    const int seeds = 3;
    for (int seed = 0; seed < seeds; ++seed) {
        c.seed = static_cast<std::uint64_t>(seed);
        Trainer t(c, mnist_like(100, 50 + seed));
        const data::BatchStream stream(t.splits().train, 100, 1);
        const data::LabeledBatch real = stream.batch(0, 0);
        const LatentInput latent = t.sample_latent_batch();
        const auto [p_real, c_real] = t.discriminator().discriminate(real.inputs);
        const auto [p_fake, c_fake] = t.discriminator().discriminate(t.generator().generate(latent));
        source_d += losses::source_loss_d(p_real, p_fake) / seeds;
        class_d += losses::class_loss_d_fcgan(c_real, real.labels, c_fake) / seeds;
    }
    EXPECT_NEAR(source_d, 1.3862943611198906, 0.3);
    EXPECT_NEAR(class_d, 4.795790545596741, 0.5);
}

TEST(Training, SameSeedIsBitIdentical) {
    TrainConfig c = toy_config(Variant::fcgan, 200);
    c.epochs = 10;
    Trainer a(c), b(c);
    a.run();
    b.run();
    EXPECT_TRUE(same_history(a.record().history, b.record().history));
    EXPECT_EQ(a.generator().parameters().fingerprint(), b.generator().parameters().fingerprint());
    EXPECT_EQ(a.discriminator().buffers().fingerprint(), b.discriminator().buffers().fingerprint());
    c.seed = 8;
    Trainer other(c);
    other.run();
    EXPECT_FALSE(same_history(a.record().history, other.record().history));
}

TEST(Training, ResumeContinuesBitIdentically) {
    const fs::path dir = scratch_dir("resume");
    TrainConfig c = toy_config(Variant::fcgan, 100);
    c.epochs = 4;
    Trainer straight(c);
    straight.run();

    TrainConfig half = c;
    half.epochs = 2;
    Trainer first(half);
    first.set_checkpoint_dir(dir);
    first.run();
    ASSERT_TRUE(fs::exists(dir / "epoch_0002.ckpt"));
    ASSERT_TRUE(fs::exists(dir / "final.ckpt"));

    Trainer second = Trainer::resume(dir / "epoch_0002.ckpt", c);
    EXPECT_EQ(second.step(), 12u);
    second.run();
    EXPECT_TRUE(same_history(straight.record().history, second.record().history));
    EXPECT_EQ(straight.generator().parameters().fingerprint(), second.generator().parameters().fingerprint());
    EXPECT_EQ(straight.discriminator().parameters().fingerprint(), second.discriminator().parameters().fingerprint());
    EXPECT_EQ(straight.discriminator().buffers().fingerprint(), second.discriminator().buffers().fingerprint());
    fs::remove_all(dir);
}

TEST(Training, MovedTrainerKeepsItsData) {
    TrainConfig c = toy_config(Variant::fcgan, 100);
    c.epochs = 2;
    Trainer in_place(c);
    in_place.run();
    std::optional<Trainer> moved;
    moved.emplace(Trainer(c));
    Trainer again = std::move(*moved);
    moved.reset();
    again.run();
    EXPECT_EQ(again.step(), 12u);
    EXPECT_TRUE(same_history(in_place.record().history, again.record().history));
}

TEST(Training, ResumeRejectsChangedSettings) {
    const fs::path dir = scratch_dir("changed");
    TrainConfig c = toy_config(Variant::fcgan, 100);
    Trainer t(c);
    t.set_checkpoint_dir(dir);
    t.run();
    TrainConfig bigger = c;
    bigger.batch_size = 60;
    EXPECT_THROW(Trainer::resume(dir / "final.ckpt", bigger), CheckpointError);
    TrainConfig other_variant = c;
    other_variant.variant = Variant::acgan;
    EXPECT_THROW(Trainer::resume(dir / "final.ckpt", other_variant), CheckpointError);
    TrainConfig longer = c;
    longer.epochs = 3;
    EXPECT_NO_THROW(Trainer::resume(dir / "final.ckpt", longer));
    fs::remove_all(dir);
}

TEST(Training, CorruptCheckpointIsRejected) {
    const fs::path dir = scratch_dir("corrupt");
    TrainConfig c = toy_config(Variant::fcgan, 100);
    Trainer t(c);
    t.set_checkpoint_dir(dir);
    t.run();
    const fs::path ckpt = dir / "final.ckpt";
    {
        std::fstream f(ckpt, std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(100);
        char byte = 0;
        f.read(&byte, 1);
        byte = static_cast<char>(byte ^ 0x5a);
        f.seekp(100);
        f.write(&byte, 1);
    }
    EXPECT_THROW(read_checkpoint(ckpt), CheckpointError);
    EXPECT_THROW(Trainer::resume(ckpt, c), CheckpointError);
    fs::resize_file(ckpt, 20);
    EXPECT_THROW(read_checkpoint(ckpt), CheckpointError);
    EXPECT_THROW(read_checkpoint(dir / "missing.ckpt"), CheckpointError);
    fs::remove_all(dir);
}

TEST(Training, EachStepTouchesOnlyItsOwnPlayer) {
    for (Variant v : {Variant::fcgan, Variant::acgan}) {
        TrainConfig c = toy_config(v, 100);
        Trainer t(c);
        const data::BatchStream stream(t.splits().train, c.batch_size, 3);
        const auto g_params = t.generator().parameters().fingerprint();
        const auto g_buffers = t.generator().buffers().fingerprint();
        const auto d_params = t.discriminator().parameters().fingerprint();
        t.discriminator_step(stream.batch(0, 0), t.sample_latent_batch());
        EXPECT_EQ(t.generator().parameters().fingerprint(), g_params);
        EXPECT_EQ(t.generator().buffers().fingerprint(), g_buffers);
        EXPECT_NE(t.discriminator().parameters().fingerprint(), d_params);

        const auto d_after = t.discriminator().parameters().fingerprint();
        const auto d_buffers = t.discriminator().buffers().fingerprint();
        t.generator_step(t.sample_latent_batch());
        EXPECT_EQ(t.discriminator().parameters().fingerprint(), d_after);
        EXPECT_EQ(t.discriminator().buffers().fingerprint(), d_buffers);
        EXPECT_NE(t.generator().parameters().fingerprint(), g_params);
    }
}

TEST(Training, DiscriminatorAloneDrivesItsLossDown) {
    TrainConfig c = toy_config(Variant::fcgan);
    Trainer t(c);
    const data::BatchStream stream(t.splits().train, c.batch_size, 3);
    std::vector<double> trace;
    for (std::size_t i = 0; i < 300; ++i) {
        trace.push_back(t.discriminator_step(stream.batch(i / 60, i % 60), t.sample_latent_batch()).total_d);
    }
    auto window_mean = [&](std::size_t begin) {
        return std::accumulate(trace.begin() + static_cast<long>(begin), trace.begin() + static_cast<long>(begin + 50), 0.0) / 50;
    };
    for (std::size_t w = 50; w + 50 <= trace.size(); w += 50) EXPECT_LT(window_mean(w), window_mean(w - 50)) << w;
}

TEST(Training, LabelSteersGeneratedSamples) {
    TrainConfig c = toy_config(Variant::fcgan);
    c.epochs = 5;
    Trainer t(c);
    t.run();
    std::mt19937_64 rng(1);
    LatentInput in = sample_latent(1, c.noise_dim, 3, rng);
    std::vector<Tensor> outs;
    for (int label = 0; label < 3; ++label) {
        in.labels = {label};
        outs.push_back(t.generator().generate(in));
    }
    EXPECT_FALSE(outs[0].same_values(outs[1]));
    EXPECT_FALSE(outs[1].same_values(outs[2]));
}

TEST(Training, EpochMeansAverageTheHistory) {
    TrainConfig c = toy_config(Variant::fcgan, 100);
    c.epochs = 3;
    const RunRecord r = train(c);
    const auto means = r.epoch_source_means();
    ASSERT_EQ(means.size(), 3u);
    double sum = 0;
    for (std::size_t i = 6; i < 12; ++i) sum += r.history[i].losses.source_g;
    EXPECT_EQ(means[1].epoch, 2u);
    EXPECT_NEAR(means[1].source_g, sum / 6, 1e-15);
}

TEST(Training, DivergenceRaisesWithLastGoodCheckpoint) {
    const fs::path dir = scratch_dir("diverge");
    TrainConfig c = toy_config(Variant::fcgan, 100);
    c.adam.learning_rate = 1e150;
    c.epochs = 50;
    Trainer t(c);
    t.set_checkpoint_dir(dir);
    try {
        t.run();
        FAIL() << "training did not diverge";
    } catch (const TrainingDiverged& e) {
        if (e.last_good_checkpoint) EXPECT_TRUE(fs::exists(*e.last_good_checkpoint));
        for (const auto& s : t.record().history) EXPECT_TRUE(std::isfinite(s.losses.total_d));
    }
    fs::remove_all(dir);
}

TEST(Training, RejectsInconsistentData) {
    TrainConfig c = toy_config(Variant::fcgan, 100);
    c.dataset.num_classes = 4;
    EXPECT_THROW(Trainer(c, data::load_splits(toy_config(Variant::fcgan, 100).dataset)), std::invalid_argument);
    TrainConfig smooth = toy_config(Variant::fcgan, 100);
    smooth.label_smoothing = 1.0;
    EXPECT_THROW(Trainer{smooth}, std::invalid_argument);
}

TEST(DeriveSeed, StreamsAreDistinctAndStable) {
    EXPECT_EQ(derive_seed(7, 1), derive_seed(7, 1));
    EXPECT_NE(derive_seed(7, 1), derive_seed(7, 2));
    EXPECT_NE(derive_seed(7, 1), derive_seed(8, 1));
}

}  // namespace
}  // namespace fcgan
