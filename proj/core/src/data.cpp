#include "fcgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace fcgan::data {

Shape Dataset::sample_shape() const {
    Shape s(inputs.shape().begin() + 1, inputs.shape().end());
    return s;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > size()) throw std::out_of_range("dataset slice out of range");
    std::vector<std::size_t> rows(end - begin);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
    return gather(rows);
}

Dataset Dataset::gather(std::span<const std::size_t> rows) const {
    if (rows.empty()) throw std::invalid_argument("dataset gather: no rows");
    const std::size_t row = inputs.size() / size();
    std::vector<double> values;
    values.reserve(rows.size() * row);
    std::vector<int> out_labels;
    out_labels.reserve(rows.size());
    for (auto r : rows) {
        if (r >= size()) throw std::out_of_range("dataset gather: row out of range");
        auto d = inputs.data().subspan(r * row, row);
        values.insert(values.end(), d.begin(), d.end());
        out_labels.push_back(labels[r]);
    }
    Shape shape = inputs.shape();
    shape[0] = rows.size();
    return {Tensor(shape, std::move(values)), std::move(out_labels), num_classes};
}

std::vector<std::size_t> Dataset::label_histogram() const {
    std::vector<std::size_t> h(num_classes, 0);
    for (int l : labels) ++h.at(static_cast<std::size_t>(l));
    return h;
}

std::string to_string(DatasetKind k) {
    switch (k) {
    case DatasetKind::mnist:
        return "mnist";
    case DatasetKind::cifar10:
        return "cifar10";
    case DatasetKind::toy2d:
        return "toy2d";
    }
    return "?";
}

DatasetKind parse_dataset_kind(const std::string& s) {
    if (s == "mnist") return DatasetKind::mnist;
    if (s == "cifar10") return DatasetKind::cifar10;
    if (s == "toy2d") return DatasetKind::toy2d;
    throw std::invalid_argument("unknown dataset '" + s + "' (expected mnist, cifar10 or toy2d)");
}

Shape DatasetSpec::sample_shape() const {
    switch (kind) {
    case DatasetKind::mnist:
        return {1, 28, 28};
    case DatasetKind::cifar10:
        return {3, 32, 32};
    case DatasetKind::toy2d:
        return {2};
    }
    return {};
}

double pixel_to_unit(std::uint8_t byte) { return static_cast<double>(byte) / 127.5 - 1.0; }

std::uint8_t unit_to_pixel(double value) {
    const double v = std::clamp((value + 1.0) * 127.5, 0.0, 255.0);
    return static_cast<std::uint8_t>(std::lround(v));
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::filesystem::path& path) {
    if (offset + 4 > bytes.size()) throw DatasetError(path.string() + ": truncated header");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto img = read_file(images);
    const auto lab = read_file(labels);
    if (read_be32(img, 0, images) != 0x00000803) throw DatasetError(images.string() + ": bad IDX image magic");
    if (read_be32(lab, 0, labels) != 0x00000801) throw DatasetError(labels.string() + ": bad IDX label magic");
    const std::size_t n = read_be32(img, 4, images);
    const std::size_t rows = read_be32(img, 8, images);
    const std::size_t cols = read_be32(img, 12, images);
    const std::size_t n_labels = read_be32(lab, 4, labels);
    if (n != n_labels) {
        throw DatasetError("image count " + std::to_string(n) + " does not match label count " + std::to_string(n_labels));
    }
    if (n == 0 || rows == 0 || cols == 0) throw DatasetError(images.string() + ": empty dataset");
    if (img.size() < 16 + n * rows * cols) throw DatasetError(images.string() + ": truncated pixel data");
    if (lab.size() < 8 + n) throw DatasetError(labels.string() + ": truncated label data");

    std::vector<double> values(n * rows * cols);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = pixel_to_unit(img[16 + i]);
    std::vector<int> out_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        out_labels[i] = lab[8 + i];
        if (out_labels[i] > 9) throw DatasetError(labels.string() + ": label outside 0..9");
    }
    return {Tensor({n, 1, rows, cols}, std::move(values)), std::move(out_labels), 10};
}

Dataset load_cifar10_binary(const std::vector<std::filesystem::path>& files) {
    constexpr std::size_t kPixels = 3 * 32 * 32;
    std::vector<double> values;
    std::vector<int> labels;
    for (const auto& f : files) {
        const auto bytes = read_file(f);
        if (bytes.empty() || bytes.size() % (kPixels + 1) != 0) throw DatasetError(f.string() + ": not a CIFAR-10 batch");
        for (std::size_t off = 0; off < bytes.size(); off += kPixels + 1) {
            if (bytes[off] > 9) throw DatasetError(f.string() + ": label outside 0..9");
            labels.push_back(bytes[off]);
            for (std::size_t i = 0; i < kPixels; ++i) values.push_back(pixel_to_unit(bytes[off + 1 + i]));
        }
    }
    if (labels.empty()) throw DatasetError("no CIFAR-10 files given");
    const std::size_t n = labels.size();
    return {Tensor({n, 3, 32, 32}, std::move(values)), std::move(labels), 10};
}

Dataset make_toy2d(std::size_t num_classes, std::size_t per_class, std::uint64_t seed, double sigma) {
    if (num_classes < 2) throw std::invalid_argument("make_toy2d: need at least two classes");
    if (per_class == 0) throw std::invalid_argument("make_toy2d: per_class must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> values;
    std::vector<int> labels;
    values.reserve(2 * num_classes * per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t k = 0; k < num_classes; ++k) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(num_classes);
            const double x = std::cos(angle) + noise(rng);
            const double y = std::sin(angle) + noise(rng);
            values.push_back(std::clamp(x, -1.0, 1.0));
            values.push_back(std::clamp(y, -1.0, 1.0));
            labels.push_back(static_cast<int>(k));
        }
    }
    const std::size_t n = labels.size();
    return {Tensor({n, 2}, std::move(values)), std::move(labels), num_classes};
}

void write_toy_csv(const Dataset& data, const std::filesystem::path& path) {
    if (data.sample_shape() != Shape{2}) throw std::invalid_argument("write_toy_csv: samples must be 2-D points");
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write " + path.string());
    out << "x,y,label\n";
    char line[96];
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%d\n", data.inputs[2 * i], data.inputs[2 * i + 1], data.labels[i]);
        out << line;
    }
}

Dataset read_toy_csv(const std::filesystem::path& path, std::size_t num_classes) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "x,y,label") throw DatasetError(path.string() + ": missing x,y,label header");
    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        double x = 0, y = 0;
        int label = -1;
        char c1 = 0, c2 = 0;
        if (!(row >> x >> c1 >> y >> c2 >> label) || c1 != ',' || c2 != ',' || label < 0 ||
            static_cast<std::size_t>(label) >= num_classes || std::abs(x) > 1.0 || std::abs(y) > 1.0) {
            throw DatasetError(path.string() + ": malformed row '" + line + "'");
        }
        values.push_back(x);
        values.push_back(y);
        labels.push_back(label);
    }
    if (labels.empty()) throw DatasetError(path.string() + ": no rows");
    const std::size_t n = labels.size();
    return {Tensor({n, 2}, std::move(values)), std::move(labels), num_classes};
}

Splits load_splits(const DatasetSpec& spec) {
    Splits s;
    switch (spec.kind) {
    case DatasetKind::toy2d: {
        std::seed_seq seq{spec.data_seed};
        std::uint64_t seeds[3];
        std::uint32_t raw[6];
        seq.generate(std::begin(raw), std::end(raw));
        for (int i = 0; i < 3; ++i) seeds[i] = (std::uint64_t{raw[2 * i]} << 32) | raw[2 * i + 1];
        s.train = make_toy2d(spec.num_classes, spec.per_class, seeds[0], spec.toy_sigma);
        if (spec.validation_per_class > 0) {
            s.validation = make_toy2d(spec.num_classes, spec.validation_per_class, seeds[1], spec.toy_sigma);
        }
        if (spec.test_per_class > 0) s.test = make_toy2d(spec.num_classes, spec.test_per_class, seeds[2], spec.toy_sigma);
        return s;
    }
    case DatasetKind::mnist: {
        const std::filesystem::path dir(spec.directory);
        Dataset train = load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
        if (spec.validation_size >= train.size()) throw DatasetError("validation split larger than the training set");
        const std::size_t cut = train.size() - spec.validation_size;
        if (spec.validation_size > 0) s.validation = train.slice(cut, train.size());
        s.train = train.slice(0, spec.train_subset > 0 ? std::min(cut, spec.train_subset) : cut);
        const auto test_images = dir / "t10k-images-idx3-ubyte";
        if (std::filesystem::exists(test_images)) s.test = load_mnist_idx(test_images, dir / "t10k-labels-idx1-ubyte");
        return s;
    }
    case DatasetKind::cifar10: {
        const std::filesystem::path dir(spec.directory);
        std::vector<std::filesystem::path> files;
        for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
        Dataset train = load_cifar10_binary(files);
        if (spec.validation_size >= train.size()) throw DatasetError("validation split larger than the training set");
        const std::size_t cut = train.size() - spec.validation_size;
        if (spec.validation_size > 0) s.validation = train.slice(cut, train.size());
        s.train = train.slice(0, spec.train_subset > 0 ? std::min(cut, spec.train_subset) : cut);
        const auto test = dir / "test_batch.bin";
        if (std::filesystem::exists(test)) s.test = load_cifar10_binary({test});
        return s;
    }
    }
    return s;
}

BatchStream::BatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t seed)
    : data_(&data), batch_size_(batch_size), seed_(seed) {
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (batch_size > data.size()) {
        throw std::invalid_argument("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                                    std::to_string(data.size()));
    }
}

std::vector<std::size_t> BatchStream::epoch_order(std::size_t epoch) const {
    std::vector<std::size_t> order(data_->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

LabeledBatch BatchStream::batch(std::size_t epoch, std::size_t index) const {
    if (index >= batches_per_epoch()) throw std::out_of_range("batch index beyond the epoch");
    if (cached_epoch_ != epoch) {
        cached_order_ = epoch_order(epoch);
        cached_epoch_ = epoch;
    }
    std::span<const std::size_t> rows(cached_order_.data() + index * batch_size_, batch_size_);
    Dataset d = data_->gather(rows);
    return {std::move(d.inputs), std::move(d.labels)};
}

}  // namespace fcgan::data
