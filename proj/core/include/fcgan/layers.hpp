#pragma once

#include <cstdint>
#include <random>

#include "fcgan/autodiff.hpp"
#include "fcgan/tensor.hpp"

namespace fcgan::nn {

enum class LayerKind { conv, deconv, fc };

struct Padding {
    std::size_t top = 0;
    std::size_t bottom = 0;
    std::size_t left = 0;
    std::size_t right = 0;

    static Padding uniform(std::size_t p) { return {p, p, p, p}; }
    bool operator==(const Padding&) const = default;
};

struct ConvOptions {
    std::size_t stride = 1;
    Padding padding;
    std::size_t output_padding = 0;  // deconv only
};

/// Stored form of one layer.
///
/// Weight layouts: conv [out_ch, in_ch, kh, kw]; deconv [in_ch, out_ch, kh, kw]
/// (the kernel of the conv it is the adjoint of); fc [in, out].
struct LayerParams {
    LayerKind kind = LayerKind::fc;
    Tensor weight;
    Tensor bias;
    ConvOptions conv;
};

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad_lo,
                             std::size_t pad_hi);
std::size_t deconv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad_lo,
                               std::size_t pad_hi, std::size_t output_padding);

/// input [b,c,h,w], weight [oc,c,kh,kw], bias [oc] -> [b,oc,oh,ow].
Var conv2d(const Var& input, const Var& weight, const Var& bias, const ConvOptions& options);
/// Transposed convolution. input [b,c,h,w], weight [c,oc,kh,kw], bias [oc].
Var deconv2d(const Var& input, const Var& weight, const Var& bias, const ConvOptions& options);
/// input [b,in] . weight [in,out] + bias [out].
Var fully_connected(const Var& input, const Var& weight, const Var& bias);

/// Applies a stored layer; weight and bias are recorded as differentiable leaves.
Var apply(const Var& input, const LayerParams& layer);

enum class Activation { identity, relu, leaky_relu, tanh, sigmoid, softmax };

Var activation(Activation kind, const Var& x, double leaky_slope = 0.2);

/// Batch normalization over every axis except axis 1 (features/channels),
/// using the statistics of the batch itself. Biased batch variance is
/// written to `batch_var` when given.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, double eps, Tensor* batch_mean = nullptr,
               Tensor* batch_var = nullptr);

/// Batch normalization with fixed statistics (inference).
Var batch_norm_fixed(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean, const Tensor& var,
                     double eps);

/// Normal(0, stddev) samples with draws beyond 2 stddev rejected and redrawn.
Tensor init_truncated_normal(const Shape& shape, double stddev, std::uint64_t seed);
Tensor init_truncated_normal(const Shape& shape, double stddev, std::mt19937_64& rng);

}  // namespace fcgan::nn
