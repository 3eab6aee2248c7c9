#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fcgan/adam.hpp"
#include "gradient_suite.hpp"

namespace fcgan {
namespace {

ParameterSet single(double value) {
    ParameterSet p;
    p.add("theta", Tensor::scalar(value));
    return p;
}

TEST(AdamConfig, DefaultsMatchMnistSetup) {
    const AdamConfig c;
    EXPECT_EQ(c.learning_rate, 0.00002);
    EXPECT_EQ(c.beta1, 0.5);
    EXPECT_EQ(c.beta2, 0.999);
    EXPECT_EQ(c.epsilon, 1e-8);
}

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
    ParameterSet p;
    p.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
    Adam adam(p, {});
    const auto before = p.fingerprint();
    adam.step(p, {Tensor::zeros({2, 2})});
    EXPECT_EQ(p.fingerprint(), before);
    EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, FirstStepClosedForm) {
    ParameterSet p = single(0.0);
    const AdamConfig cfg;
    Adam adam(p, cfg);
    adam.step(p, {Tensor::scalar(1.0)});
    // m_hat = 1, v_hat = 1: delta = -lr / (1 + eps)
    EXPECT_DOUBLE_EQ(p.at("theta").item(), -cfg.learning_rate / (1.0 + cfg.epsilon));
    EXPECT_NEAR(p.at("theta").item(), -2e-5, 1e-12);
}

TEST(Adam, TwoStepsClosedForm) {
    ParameterSet p = single(0.5);
    const AdamConfig cfg{0.1, 0.5, 0.999, 1e-8};
    Adam adam(p, cfg);
    adam.step(p, {Tensor::scalar(2.0)});
    adam.step(p, {Tensor::scalar(-1.0)});
    double m = 0, v = 0, theta = 0.5;
    int t = 0;
    for (double g : {2.0, -1.0}) {
        ++t;
        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        theta -= cfg.learning_rate * (m / (1 - std::pow(cfg.beta1, t))) / (std::sqrt(v / (1 - std::pow(cfg.beta2, t))) + cfg.epsilon);
    }
    EXPECT_NEAR(p.at("theta").item(), theta, 1e-15);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
    auto run = [] {
        std::mt19937_64 rng(3);
        ParameterSet p;
        p.add("a", testing::random_tensor({3, 4}, rng));
        Adam adam(p, {});
        for (int i = 0; i < 50; ++i) adam.step(p, {testing::random_tensor({3, 4}, rng)});
        return p.at("a");
    };
    EXPECT_TRUE(run().same_values(run()));
}

TEST(Adam, ConvexQuadraticNeverIncreases) {
    std::mt19937_64 rng(4);
    const Tensor curvature = testing::random_tensor({8}, rng, 0.1, 5.0);
    ParameterSet p;
    p.add("x", testing::random_tensor({8}, rng, -1, 1));
    Adam adam(p, {});
    auto value = [&] {
        double f = 0;
        for (std::size_t i = 0; i < 8; ++i) f += curvature[i] * p.at("x")[i] * p.at("x")[i];
        return f;
    };
    double last = value();
    for (int step = 0; step < 1000; ++step) {
        std::vector<double> g(8);
        for (std::size_t i = 0; i < 8; ++i) g[i] = 2 * curvature[i] * p.at("x")[i];
        adam.step(p, {Tensor({8}, g)});
        const double f = value();
        ASSERT_LE(f, last) << "step " << step;
        last = f;
    }
}

// Per coordinate |delta| <= lr * (1 - beta1) / sqrt(1 - beta2) when
// 1 - beta1 > sqrt(1 - beta2); a lone spike after quiet steps approaches it.
double worst_case_step(const AdamConfig& c) { return c.learning_rate * (1 - c.beta1) / std::sqrt(1 - c.beta2); }

TEST(Adam, UpdateBoundOnHeavyTailedGradients) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    const AdamConfig cfg;
    ParameterSet p;
    p.add("x", Tensor::zeros({64}));
    Adam adam(p, cfg);
    for (int step = 0; step < 2000; ++step) {
        std::vector<double> g(64);
        for (double& v : g) v = n(rng) * std::exp(3 * n(rng));
        const Tensor before = p.at("x");
        adam.step(p, {Tensor({64}, g)});
        for (std::size_t i = 0; i < 64; ++i) ASSERT_LE(std::abs(p.at("x")[i] - before[i]), worst_case_step(cfg));
    }
}

TEST(Adam, SpikeAfterQuietStepsNearsTheBound) {
    const AdamConfig cfg;
    ParameterSet p = single(0.0);
    Adam adam(p, cfg);
    for (int step = 0; step < 20000; ++step) adam.step(p, {Tensor::scalar(0.0)});
    adam.step(p, {Tensor::scalar(1.0)});
    const double delta = std::abs(p.at("theta").item());
    EXPECT_LE(delta, worst_case_step(cfg));
    EXPECT_GT(delta, 0.99 * worst_case_step(cfg));
    // So the tighter lr / (1 - beta1) does not hold in general.
    EXPECT_GT(delta, cfg.learning_rate / (1 - cfg.beta1));
}

TEST(Adam, RejectsBadGradientsWithoutMutation) {
    ParameterSet p = single(1.0);
    Adam adam(p, {});
    EXPECT_THROW(adam.step(p, {Tensor({2}, {1, 2})}), std::invalid_argument);
    EXPECT_THROW(adam.step(p, {}), std::invalid_argument);
    EXPECT_THROW(adam.step(p, {Tensor::scalar(NAN)}), NonFiniteError);
    EXPECT_EQ(p.at("theta").item(), 1.0);
    EXPECT_EQ(adam.steps(), 0u);
}

TEST(Adam, RejectsInvalidHyperparameters) {
    const ParameterSet p = single(0.0);
    const std::vector<AdamConfig> bad = {
        {0.0, 0.5, 0.999, 1e-8}, {1e-3, 1.0, 0.999, 1e-8}, {1e-3, 0.5, -0.1, 1e-8}, {1e-3, 0.5, 0.999, 0.0}};
    for (const AdamConfig& cfg : bad) EXPECT_THROW(Adam(p, cfg), std::invalid_argument);
}

TEST(Adam, MomentsMirrorParameterShapes) {
    ParameterSet p;
    p.add("w", Tensor::zeros({2, 3}));
    p.add("b", Tensor::zeros({3}));
    Adam adam(p, {});
    adam.step(p, {Tensor::full({2, 3}, 0.1), Tensor::full({3}, -0.2)});
    EXPECT_EQ(adam.first_moment().at("w").shape(), (Shape{2, 3}));
    EXPECT_EQ(adam.second_moment().at("b").shape(), (Shape{3}));
    ParameterSet wrong;
    wrong.add("w", Tensor::zeros({3, 2}));
    wrong.add("b", Tensor::zeros({3}));
    EXPECT_THROW(adam.restore(1, wrong, adam.second_moment()), std::invalid_argument);
}

}  // namespace
}  // namespace fcgan
