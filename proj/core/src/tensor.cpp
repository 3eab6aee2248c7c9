#include "fcgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace fcgan {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void check_shape(const Shape& shape) {
    for (auto d : shape) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_string(shape));
    }
}

}  // namespace

Tensor::Tensor() : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
    check_shape(shape_);
    if (shape_size(shape_) != values.size()) {
        throw std::invalid_argument("tensor shape " + shape_string(shape_) + " needs " +
                                    std::to_string(shape_size(shape_)) + " values, got " +
                                    std::to_string(values.size()));
    }
    data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape), std::vector<double>(values)) {}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
    check_shape(shape);
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, std::vector<double>{value}); }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
    }
    return shape_[axis];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) throw std::invalid_argument("index rank does not match tensor rank");
    std::size_t offset = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= shape_[axis]) throw std::out_of_range("tensor index out of range");
        offset = offset * shape_[axis] + i;
        ++axis;
    }
    return (*data_)[offset];
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_string(shape_));
    return (*data_)[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    check_shape(shape);
    if (shape_size(shape) != size()) {
        throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
}

bool Tensor::all_finite() const {
    return std::all_of(data_->begin(), data_->end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::same_values(const Tensor& other) const {
    return shape_ == other.shape_ &&
           std::memcmp(data_->data(), other.data_->data(), size() * sizeof(double)) == 0;
}

void require_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) throw NonFiniteError(std::string("non-finite value produced by ") + where);
}

}  // namespace fcgan
