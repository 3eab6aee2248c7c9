#pragma once

#include <functional>

#include "fcgan/tensor.hpp"

namespace fcgan {

/// Central-difference gradient of a scalar function:
/// (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for each coordinate i.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps = 1e-5);

/// max_i |a_i - b_i| divided by max_i max(|a_i|, |b_i|); zero when both
/// tensors are identically zero.
double gradient_relative_error(const Tensor& analytic, const Tensor& numeric);

}  // namespace fcgan
