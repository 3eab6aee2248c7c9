#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fcgan/data.hpp"
#include "fcgan/models.hpp"

namespace fcgan {

struct ClassifierOptions {
    std::size_t epochs = 5;
    std::size_t batch_size = 100;
    double learning_rate = 1e-3;
    std::size_t hidden = 64;  // flat inputs only
    std::uint64_t seed = 0;
};

/// Small N-way classifier used to score generated samples: an MLP for flat
/// inputs, two strided convolutions for images.
class Classifier {
public:
    static Classifier train(const data::Dataset& train, const ClassifierOptions& options);

    /// Rows of p(y|x), shape [n, num_classes].
    Tensor predict_proba(const Tensor& x) const;
    std::vector<int> predict(const Tensor& x) const;
    double accuracy(const Tensor& x, std::span<const int> labels) const;
    double accuracy(const data::Dataset& d) const { return accuracy(d.inputs, d.labels); }

    std::size_t num_classes() const { return num_classes_; }
    const Shape& sample_shape() const { return sample_shape_; }

private:
    Classifier() = default;

    std::size_t num_classes_ = 0;
    Shape sample_shape_;
    std::shared_ptr<detail::Network> net_;
};

}  // namespace fcgan
