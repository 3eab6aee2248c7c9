#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fcgan/losses.hpp"
#include "gradient_suite.hpp"

namespace fcgan {
namespace {

using std::log;

Tensor col(std::initializer_list<double> v) { return Tensor({v.size(), 1}, v); }

Tensor uniform_rows(std::size_t rows, std::size_t width) {
    return Tensor::full({rows, width}, 1.0 / static_cast<double>(width));
}

/// Rows that put `hit` on column `label[i]` and share the rest evenly.
Tensor peaked_rows(const std::vector<int>& label, std::size_t width, double hit) {
    std::vector<double> v(label.size() * width, (1.0 - hit) / static_cast<double>(width - 1));
    for (std::size_t i = 0; i < label.size(); ++i) v[i * width + static_cast<std::size_t>(label[i])] = hit;
    return Tensor({label.size(), width}, std::move(v));
}

TEST(SourceLoss, EquilibriumValues) {
    const double d = losses::source_loss_d(col({0.5, 0.5}), col({0.5, 0.5}));
    const double g = losses::source_loss_g(col({0.5, 0.5, 0.5}));
    EXPECT_NEAR(d, 2 * log(2.0), 1e-12);
    EXPECT_NEAR(g, log(2.0), 1e-12);
    // 0.693 and 1.386 are the three-decimal roundings.
    EXPECT_NEAR(d, 1.386, 5e-4);
    EXPECT_NEAR(g, 0.693, 5e-4);
}

TEST(SourceLoss, PerfectPlayersReachZero) {
    EXPECT_NEAR(losses::source_loss_d(col({1.0, 1.0}), col({0.0, 0.0})), 0.0, 1e-12);
    EXPECT_NEAR(losses::source_loss_g(col({1.0})), 0.0, 1e-12);
}

TEST(SourceLoss, HandComputedBatches) {
    EXPECT_NEAR(losses::source_loss_d(col({0.9, 0.8}), col({0.1, 0.3})),
                -(log(0.9) + log(0.8)) / 2 - (log(0.9) + log(0.7)) / 2, 1e-12);
    EXPECT_NEAR(losses::source_loss_g(col({0.25, 0.75})), (-log(0.25) - log(0.75)) / 2, 1e-12);
}

TEST(SourceLoss, ClampKeepsLossFinite) {
    const double worst = losses::source_loss_d(col({0.0}), col({1.0}));
    EXPECT_NEAR(worst, -2 * log(losses::kProbabilityFloor), 1e-9);
    EXPECT_TRUE(std::isfinite(losses::source_loss_g(col({0.0}))));
}

TEST(ClassLoss, UniformFcganValues) {
    const std::vector<int> labels{0, 3, 9, 5};
    EXPECT_NEAR(losses::class_loss_d_fcgan(uniform_rows(4, 11), labels, uniform_rows(4, 11)), 2 * log(11.0), 1e-12);
    EXPECT_NEAR(losses::class_loss_g_fcgan(uniform_rows(4, 11), labels), log(11.0), 1e-12);
}

TEST(ClassLoss, PerfectFcganAssignmentIsZero) {
    const std::vector<int> labels{2, 7};
    const Tensor real = peaked_rows(labels, 11, 1.0);
    const Tensor fake = peaked_rows({10, 10}, 11, 1.0);
    EXPECT_NEAR(losses::class_loss_d_fcgan(real, labels, fake), 0.0, 1e-12);
    EXPECT_NEAR(losses::class_loss_g_fcgan(real, labels), 0.0, 1e-12);
}

TEST(ClassLoss, MixedFcganBatch) {
    // N = 2, fake class at column 2.
    const Tensor real({2, 3}, {0.7, 0.2, 0.1, 0.3, 0.6, 0.1});
    const Tensor fake({2, 3}, {0.2, 0.2, 0.6, 0.5, 0.1, 0.4});
    const std::vector<int> labels{0, 1};
    EXPECT_NEAR(losses::class_loss_d_fcgan(real, labels, fake), (-log(0.7) - log(0.6)) / 2 + (-log(0.6) - log(0.4)) / 2, 1e-12);
    EXPECT_NEAR(losses::class_loss_g_fcgan(fake, labels), (-log(0.2) - log(0.1)) / 2, 1e-12);
}

TEST(ClassLoss, GeneratorTermOnPeakedFakeRow) {
    std::vector<double> row(11, 0.05);
    row[10] = 0.5;
    EXPECT_NEAR(losses::class_loss_g_fcgan(Tensor({1, 11}, row), std::vector<int>{3}), -log(0.05), 1e-12);
}

TEST(ClassLoss, FcganRejectsFakeOrNegativeLabels) {
    const std::vector<int> fake_class{10};
    const std::vector<int> negative{-1};
    EXPECT_THROW(losses::class_loss_g_fcgan(uniform_rows(1, 11), fake_class), std::out_of_range);
    EXPECT_THROW(losses::class_loss_d_fcgan(uniform_rows(1, 11), negative, uniform_rows(1, 11)), std::out_of_range);
}

TEST(ClassLoss, AcganValues) {
    const std::vector<int> labels{1, 4}, fake{9, 0};
    const auto [d_uniform, g_uniform] = losses::class_loss_acgan(uniform_rows(2, 10), labels, uniform_rows(2, 10), fake);
    EXPECT_NEAR(d_uniform, 2 * log(10.0), 1e-12);
    EXPECT_NEAR(g_uniform, log(10.0), 1e-12);
    const auto [d_perfect, g_perfect] =
        losses::class_loss_acgan(peaked_rows(labels, 10, 1.0), labels, peaked_rows(fake, 10, 1.0), fake);
    EXPECT_NEAR(d_perfect, 0.0, 1e-12);
    EXPECT_NEAR(g_perfect, 0.0, 1e-12);
}

TEST(ClassLoss, AcganAsymmetricPair) {
    const Tensor real({2, 2}, {0.9, 0.1, 0.4, 0.6});
    const Tensor fake({2, 2}, {0.3, 0.7, 0.8, 0.2});
    const std::vector<int> labels{0, 1}, intended{0, 0};
    const auto [d, g] = losses::class_loss_acgan(real, labels, fake, intended);
    EXPECT_NEAR(d, (-log(0.9) - log(0.6)) / 2 + (-log(0.3) - log(0.8)) / 2, 1e-12);
    EXPECT_NEAR(g, (-log(0.3) - log(0.8)) / 2, 1e-12);
    const std::vector<int> bad{2, 0};
    EXPECT_THROW(losses::class_loss_acgan(real, bad, fake, intended), std::out_of_range);
}

TEST(TotalLosses, SumIdentities) {
    const auto eq = losses::total_losses(1.386, 0.693, 2 * log(11.0), log(11.0));
    EXPECT_EQ(eq.total_d, 1.386 + 2 * log(11.0));
    EXPECT_EQ(eq.total_g, 0.693 + log(11.0));
    const auto zero = losses::total_losses(0, 0, 0, 0);
    EXPECT_EQ(zero.total_d, 0.0);
    EXPECT_EQ(zero.total_g, 0.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 10);
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        const auto r = losses::total_losses(a, b, c, d);
        EXPECT_EQ(r.total_d, a + c);
        EXPECT_EQ(r.total_g, b + d);
    }
}

TEST(LossProperties, NonNegativeAndFiniteOnSimplexInputs) {
    std::mt19937_64 rng(2);
    Tape tape;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t b = 3, n = 4;
        // Large logits push probabilities to the clamp floor.
        const Tensor pr = ops::softmax(tape.constant(testing::random_tensor({b, n + 1}, rng, -40, 40))).value();
        const Tensor pf = ops::softmax(tape.constant(testing::random_tensor({b, n + 1}, rng, -40, 40))).value();
        const Tensor sr = ops::sigmoid(tape.constant(testing::random_tensor({b, 1}, rng, -40, 40))).value();
        const Tensor sf = ops::sigmoid(tape.constant(testing::random_tensor({b, 1}, rng, -40, 40))).value();
        const std::vector<int> labels{0, 2, 3};
        for (double v : {losses::source_loss_d(sr, sf), losses::source_loss_g(sf), losses::class_loss_d_fcgan(pr, labels, pf),
                         losses::class_loss_g_fcgan(pf, labels)}) {
            EXPECT_GE(v, 0.0);
            EXPECT_TRUE(std::isfinite(v));
        }
    }
}

TEST(LossProperties, FcganClassLossIsSymmetricUnderRealClassPermutation) {
    std::mt19937_64 rng(3);
    Tape tape;
    const std::size_t n = 5;
    const Tensor real = ops::softmax(tape.constant(testing::random_tensor({4, n + 1}, rng, -2, 2))).value();
    const Tensor fake = ops::softmax(tape.constant(testing::random_tensor({4, n + 1}, rng, -2, 2))).value();
    const std::vector<int> labels{0, 4, 2, 1};
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};  // fake column N stays put
    auto permute = [&](const Tensor& t) {
        std::vector<double> v(t.size());
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < n; ++c) v[r * (n + 1) + perm[c]] = t.at({r, c});
            v[r * (n + 1) + n] = t.at({r, n});
        }
        return Tensor(t.shape(), std::move(v));
    };
    std::vector<int> moved(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) moved[i] = static_cast<int>(perm[static_cast<std::size_t>(labels[i])]);
    EXPECT_NEAR(losses::class_loss_d_fcgan(real, labels, fake), losses::class_loss_d_fcgan(permute(real), moved, permute(fake)),
                1e-14);
}

TEST(LossProperties, FakeClassCostsLogRatioUnderUniformPredictions) {
    for (std::size_t n : {2u, 3u, 10u}) {
        const std::vector<int> labels{0, 1};
        const double fc = losses::class_loss_g_fcgan(uniform_rows(2, n + 1), labels);
        const auto [d, ac] = losses::class_loss_acgan(uniform_rows(2, n), labels, uniform_rows(2, n), labels);
        EXPECT_NEAR(fc - ac, log(static_cast<double>(n + 1) / static_cast<double>(n)), 1e-12);
    }
}

TEST(GradientSuite, EveryLossOnTwentyRandomInstances) {
    for (const auto& r : testing::run_gradient_suite(testing::loss_cases(), 20, 99)) {
        EXPECT_LT(r.worst_error, r.tolerance) << r.name;
    }
}

}  // namespace
}  // namespace fcgan
