#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcgan {

using Shape = std::vector<std::size_t>;

/// Raised when an operation would produce NaN or Inf.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Tensors are immutable once constructed; copies share storage. Every
/// dimension is strictly positive and a rank-0 tensor holds one scalar.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<double> values);
    Tensor(Shape shape, std::initializer_list<double> values);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return data_->size(); }

    std::span<const double> data() const { return {data_->data(), data_->size()}; }
    const double* raw() const { return data_->data(); }
    double operator[](std::size_t i) const { return (*data_)[i]; }
    double at(std::initializer_list<std::size_t> index) const;

    /// Value of a one-element tensor.
    double item() const;

    /// Same storage viewed with a different shape of equal element count.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const;
    bool same_values(const Tensor& other) const;

private:
    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
};

/// Throws NonFiniteError naming `where` if any element is NaN or Inf.
void require_finite(const Tensor& t, const char* where);

}  // namespace fcgan
