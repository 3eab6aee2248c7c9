#include <benchmark/benchmark.h>

#include <random>

#include "fcgan/layers.hpp"
#include "fcgan/training.hpp"

namespace {

using namespace fcgan;

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return Tensor(shape, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(ops::matmul(tape.constant(a), tape.constant(b)).value().raw());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(1024);

// D conv2: 32 -> 64 channels at 14x14, batch 100.
void BM_Conv2dForwardBackward(benchmark::State& state) {
    const Tensor x = random_tensor({100, 32, 14, 14}, 3), w = random_tensor({64, 32, 3, 3}, 4);
    const Tensor b = Tensor::zeros({64});
    const nn::ConvOptions opts{1, nn::Padding::uniform(1), 0};
    for (auto _ : state) {
        Tape tape;
        Var wv = tape.variable(w);
        Var y = nn::conv2d(tape.constant(x), wv, tape.constant(b), opts);
        benchmark::DoNotOptimize(tape.backward(ops::sum(y)).of(wv).raw());
    }
}
BENCHMARK(BM_Conv2dForwardBackward)->Unit(benchmark::kMillisecond);

// G deconv1: 128 -> 256 channels, 7x7 -> 14x14, batch 100.
void BM_Deconv2dForwardBackward(benchmark::State& state) {
    const Tensor x = random_tensor({100, 128, 7, 7}, 5), w = random_tensor({128, 256, 5, 5}, 6);
    const Tensor b = Tensor::zeros({256});
    const nn::ConvOptions opts{2, nn::Padding::uniform(2), 1};
    for (auto _ : state) {
        Tape tape;
        Var wv = tape.variable(w);
        Var y = nn::deconv2d(tape.constant(x), wv, tape.constant(b), opts);
        benchmark::DoNotOptimize(tape.backward(ops::sum(y)).of(wv).raw());
    }
}
BENCHMARK(BM_Deconv2dForwardBackward)->Unit(benchmark::kMillisecond);

TrainConfig toy_config() {
    TrainConfig c;
    c.dataset.validation_per_class = 0;
    c.dataset.test_per_class = 0;
    c.architecture = Architecture::mlp;
    c.network.init_stddev = 0.2;
    c.adam.learning_rate = 1e-3;
    c.batch_size = 50;
    c.epochs = 1000000;
    return c;
}

void BM_ToyTrainStep(benchmark::State& state) {
    Trainer t(toy_config());
    for (auto _ : state) benchmark::DoNotOptimize(t.train_step().losses.total_d);
}
BENCHMARK(BM_ToyTrainStep)->Unit(benchmark::kMillisecond);

void BM_ConvTrainStep(benchmark::State& state) {
    TrainConfig c;
    c.dataset.kind = data::DatasetKind::mnist;
    c.dataset.num_classes = 10;
    data::Splits s;
    std::vector<int> labels(200);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
    s.train = {random_tensor({200, 1, 28, 28}, 7), labels, 10};
    Trainer t(c, std::move(s));
    for (auto _ : state) benchmark::DoNotOptimize(t.train_step().losses.total_d);
}
BENCHMARK(BM_ConvTrainStep)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
BENCHMARK_MAIN();
