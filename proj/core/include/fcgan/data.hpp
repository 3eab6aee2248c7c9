#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcgan/tensor.hpp"

namespace fcgan::data {

/// Malformed or missing dataset files.
class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Samples scaled to [-1,1] with integer labels in [0, num_classes).
struct Dataset {
    Tensor inputs;  // [n, sample_shape...]
    std::vector<int> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    Shape sample_shape() const;
    /// Rows [begin, end).
    Dataset slice(std::size_t begin, std::size_t end) const;
    Dataset gather(std::span<const std::size_t> rows) const;
    std::vector<std::size_t> label_histogram() const;
};

struct LabeledBatch {
    Tensor inputs;
    std::vector<int> labels;
};

enum class DatasetKind { mnist, cifar10, toy2d };

std::string to_string(DatasetKind k);
DatasetKind parse_dataset_kind(const std::string& s);

struct DatasetSpec {
    DatasetKind kind = DatasetKind::toy2d;
    std::size_t num_classes = 3;

    // toy2d
    std::size_t per_class = 1000;
    std::size_t validation_per_class = 500;
    std::size_t test_per_class = 1000;
    double toy_sigma = 0.15;
    std::uint64_t data_seed = 1;

    // mnist / cifar10
    std::string directory;
    std::size_t train_subset = 0;  // 0 keeps every training sample
    std::size_t validation_size = 5000;

    Shape sample_shape() const;
};

struct Splits {
    Dataset train;
    Dataset validation;
    Dataset test;  // empty when no test split is requested
};

Splits load_splits(const DatasetSpec& spec);

/// Linear map of a pixel byte onto [-1,1] and its exact inverse.
double pixel_to_unit(std::uint8_t byte);
std::uint8_t unit_to_pixel(double value);

/// MNIST IDX pair (magic 0x00000803 for images, 0x00000801 for labels).
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR-10 binary batches: records of one label byte and 3x32x32 pixel bytes.
Dataset load_cifar10_binary(const std::vector<std::filesystem::path>& files);

/// Class k ~ N(center_k, sigma^2 I) with center_k at angle 2 pi k / N on the
/// unit circle, clipped to [-1,1]^2; samples interleave classes.
Dataset make_toy2d(std::size_t num_classes, std::size_t per_class, std::uint64_t seed, double sigma = 0.15);

void write_toy_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_toy_csv(const std::filesystem::path& path, std::size_t num_classes);

/// Per-epoch shuffled mini-batches; the order of epoch e depends only on
/// (seed, e). The trailing partial batch is dropped.
class BatchStream {
public:
    BatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t seed);

    std::size_t batches_per_epoch() const { return data_->size() / batch_size_; }
    std::size_t batch_size() const { return batch_size_; }
    std::vector<std::size_t> epoch_order(std::size_t epoch) const;
    LabeledBatch batch(std::size_t epoch, std::size_t index) const;

private:
    const Dataset* data_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    mutable std::size_t cached_epoch_ = static_cast<std::size_t>(-1);
    mutable std::vector<std::size_t> cached_order_;
};

}  // namespace fcgan::data
