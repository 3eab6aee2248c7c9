#include "fcgan/classifier.hpp"

#include <algorithm>

#include "fcgan/adam.hpp"
#include "fcgan/losses.hpp"

namespace fcgan {

namespace {

std::vector<detail::Stage> classifier_stages(const Shape& sample, std::size_t classes, std::size_t hidden) {
    using nn::Activation;
    using nn::LayerKind;
    if (sample.size() == 1) {
        return {{"fc1", LayerKind::fc, hidden, 0, {}, false, Activation::relu, {}},
                {"fc2", LayerKind::fc, hidden, 0, {}, false, Activation::relu, {}},
                {"out", LayerKind::fc, classes, 0, {}, false, Activation::softmax, {}}};
    }
    const nn::ConvOptions s2{2, nn::Padding::uniform(1), 0};
    return {{"conv1", LayerKind::conv, 16, 3, s2, false, Activation::relu, {}},
            {"conv2", LayerKind::conv, 32, 3, s2, false, Activation::relu, {}},
            {"out", LayerKind::fc, classes, 0, {}, false, Activation::softmax, {}}};
}

}  // namespace

Classifier Classifier::train(const data::Dataset& train, const ClassifierOptions& options) {
    Classifier c;
    c.num_classes_ = train.num_classes;
    c.sample_shape_ = train.sample_shape();
    NetworkOptions net_opts;
    net_opts.batch_norm = false;
    net_opts.init_stddev = c.sample_shape_.size() == 1 ? 0.3 : 0.05;
    std::mt19937_64 rng(options.seed);
    c.net_ = std::make_shared<detail::Network>(classifier_stages(c.sample_shape_, c.num_classes_, options.hidden),
                                               c.sample_shape_, net_opts, rng);
    AdamConfig adam_cfg;
    adam_cfg.learning_rate = options.learning_rate;
    adam_cfg.beta1 = 0.9;
    Adam adam(c.net_->parameters(), adam_cfg);
    const std::size_t batch = std::min(options.batch_size, train.size());
    data::BatchStream stream(train, batch, options.seed);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        for (std::size_t i = 0; i < stream.batches_per_epoch(); ++i) {
            auto b = stream.batch(epoch, i);
            Tape tape;
            BoundParameters params(tape, c.net_->parameters(), true);
            Var probs = c.net_->forward(params, tape.constant(b.inputs), RunMode{true, false});
            Var loss = losses::class_loss_g_acgan(probs, b.labels);
            adam.step(c.net_->parameters(), params.gradients(tape.backward(loss)));
        }
    }
    return c;
}

Tensor Classifier::predict_proba(const Tensor& x) const {
    const std::size_t n = x.shape().at(0);
    const std::size_t row = x.size() / n;
    constexpr std::size_t kChunk = 500;
    std::vector<double> out;
    out.reserve(n * num_classes_);
    for (std::size_t begin = 0; begin < n; begin += kChunk) {
        const std::size_t end = std::min(n, begin + kChunk);
        Shape shape = x.shape();
        shape[0] = end - begin;
        auto d = x.data().subspan(begin * row, (end - begin) * row);
        Tape tape;
        BoundParameters params(tape, net_->parameters(), false);
        Var probs = net_->forward(params, tape.constant(Tensor(shape, std::vector<double>(d.begin(), d.end()))),
                                  kInference);
        out.insert(out.end(), probs.value().data().begin(), probs.value().data().end());
    }
    return Tensor({n, num_classes_}, std::move(out));
}

std::vector<int> Classifier::predict(const Tensor& x) const {
    Tensor p = predict_proba(x);
    std::vector<int> labels(p.dim(0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto row = p.data().subspan(i * num_classes_, num_classes_);
        labels[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return labels;
}

double Classifier::accuracy(const Tensor& x, std::span<const int> labels) const {
    auto pred = predict(x);
    if (pred.size() != labels.size()) throw std::invalid_argument("accuracy: label count mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace fcgan
