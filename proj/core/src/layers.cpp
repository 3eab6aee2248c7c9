#include "fcgan/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "blas.hpp"

namespace fcgan::nn {

namespace {

using Grads = std::vector<std::optional<Tensor>>;

struct Geometry {
    std::size_t channels, in_h, in_w;    // image side
    std::size_t kh, kw, stride;
    Padding pad;
    std::size_t out_h, out_w;            // sliding-window grid
};

// image [channels, in_h, in_w] -> columns [channels*kh*kw, out_h*out_w]
void im2col(const Geometry& g, const double* image, double* col) {
    const std::size_t grid = g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                double* row = col + ((c * g.kh + ky) * g.kw + kx) * grid;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad.top);
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad.left);
                        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.in_h) &&
                                            ix < static_cast<std::ptrdiff_t>(g.in_w);
                        row[oy * g.out_w + ox] = inside ? image[(c * g.in_h + iy) * g.in_w + ix] : 0.0;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates columns back into image.
void col2im(const Geometry& g, const double* col, double* image) {
    const std::size_t grid = g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const double* row = col + ((c * g.kh + ky) * g.kw + kx) * grid;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad.top);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad.left);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                        image[(c * g.in_h + iy) * g.in_w + ix] += row[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
}

void require_rank(const Var& v, std::size_t rank, const char* op, const char* what) {
    if (v.shape().size() != rank) {
        throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                                    ", got " + shape_string(v.shape()));
    }
}

std::vector<double> channel_bias_grad(const Tensor& g, std::size_t batch, std::size_t channels, std::size_t plane) {
    std::vector<double> db(channels, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double* p = g.raw() + (b * channels + c) * plane;
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += p[i];
            db[c] += s;
        }
    }
    return db;
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad_lo,
                             std::size_t pad_hi) {
    if (stride == 0) throw std::invalid_argument("conv: stride must be positive");
    if (in + pad_lo + pad_hi < kernel) {
        throw std::invalid_argument("conv: kernel " + std::to_string(kernel) + " larger than padded input " +
                                    std::to_string(in + pad_lo + pad_hi));
    }
    return (in + pad_lo + pad_hi - kernel) / stride + 1;
}

std::size_t deconv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad_lo,
                               std::size_t pad_hi, std::size_t output_padding) {
    if (stride == 0) throw std::invalid_argument("deconv: stride must be positive");
    if (output_padding >= stride) throw std::invalid_argument("deconv: output padding must be smaller than stride");
    const std::size_t full = (in - 1) * stride + kernel + output_padding;
    if (full <= pad_lo + pad_hi) throw std::invalid_argument("deconv: padding removes the whole output");
    return full - pad_lo - pad_hi;
}

Var conv2d(const Var& input, const Var& weight, const Var& bias, const ConvOptions& options) {
    require_rank(input, 4, "conv2d", "input");
    require_rank(weight, 4, "conv2d", "weight");
    const auto& xs = input.shape();
    const auto& ws = weight.shape();
    if (ws[1] != xs[1]) {
        throw std::invalid_argument("conv2d: weight " + shape_string(ws) + " expects " + std::to_string(ws[1]) +
                                    " input channels, got " + shape_string(xs));
    }
    if (bias.shape() != Shape{ws[0]}) throw std::invalid_argument("conv2d: bias must have shape [out_ch]");
    const std::size_t batch = xs[0], oc = ws[0];
    Geometry g{xs[1], xs[2], xs[3], ws[2], ws[3], options.stride, options.padding, 0, 0};
    g.out_h = conv_output_size(g.in_h, g.kh, g.stride, g.pad.top, g.pad.bottom);
    g.out_w = conv_output_size(g.in_w, g.kw, g.stride, g.pad.left, g.pad.right);

    const std::size_t patch = g.channels * g.kh * g.kw;
    const std::size_t grid = g.out_h * g.out_w;
    const std::size_t in_plane = g.channels * g.in_h * g.in_w;
    Tensor x = input.value(), w = weight.value(), bv = bias.value();

    std::vector<double> out(batch * oc * grid);
    std::vector<double> col(patch * grid);
    for (std::size_t b = 0; b < batch; ++b) {
        im2col(g, x.raw() + b * in_plane, col.data());
        double* ob = out.data() + b * oc * grid;
        for (std::size_t c = 0; c < oc; ++c) std::fill(ob + c * grid, ob + (c + 1) * grid, bv[c]);
        detail::gemm(false, false, oc, grid, patch, 1.0, w.raw(), patch, col.data(), grid, 1.0, ob, grid);
    }

    return input.tape()->record(
        "conv2d", Tensor({batch, oc, g.out_h, g.out_w}, std::move(out)), {input, weight, bias},
        [=](const Tensor& dout, const std::vector<bool>& needs) {
            Grads grads(3);
            std::vector<double> dx(needs[0] ? batch * in_plane : 0, 0.0);
            std::vector<double> dw(needs[1] ? oc * patch : 0, 0.0);
            std::vector<double> column(patch * grid);
            for (std::size_t b = 0; b < batch; ++b) {
                const double* gb = dout.raw() + b * oc * grid;
                if (needs[1]) {
                    im2col(g, x.raw() + b * in_plane, column.data());
                    detail::gemm(false, true, oc, patch, grid, 1.0, gb, grid, column.data(), grid, 1.0, dw.data(), patch);
                }
                if (needs[0]) {
                    detail::gemm(true, false, patch, grid, oc, 1.0, w.raw(), patch, gb, grid, 0.0, column.data(), grid);
                    col2im(g, column.data(), dx.data() + b * in_plane);
                }
            }
            if (needs[0]) grads[0] = Tensor(x.shape(), std::move(dx));
            if (needs[1]) grads[1] = Tensor(w.shape(), std::move(dw));
            if (needs[2]) grads[2] = Tensor({oc}, channel_bias_grad(dout, batch, oc, grid));
            return grads;
        });
}

Var deconv2d(const Var& input, const Var& weight, const Var& bias, const ConvOptions& options) {
    require_rank(input, 4, "deconv2d", "input");
    require_rank(weight, 4, "deconv2d", "weight");
    const auto& xs = input.shape();
    const auto& ws = weight.shape();
    if (ws[0] != xs[1]) {
        throw std::invalid_argument("deconv2d: weight " + shape_string(ws) + " expects " + std::to_string(ws[0]) +
                                    " input channels, got " + shape_string(xs));
    }
    if (bias.shape() != Shape{ws[1]}) throw std::invalid_argument("deconv2d: bias must have shape [out_ch]");
    const std::size_t batch = xs[0], in_ch = xs[1], oc = ws[1];
    const std::size_t oh =
        deconv_output_size(xs[2], ws[2], options.stride, options.padding.top, options.padding.bottom, options.output_padding);
    const std::size_t ow = deconv_output_size(xs[3], ws[3], options.stride, options.padding.left, options.padding.right,
                                              options.output_padding);
    // The conv that maps the output image back onto the input grid.
    Geometry g{oc, oh, ow, ws[2], ws[3], options.stride, options.padding, xs[2], xs[3]};
    if (conv_output_size(oh, g.kh, g.stride, g.pad.top, g.pad.bottom) != xs[2] ||
        conv_output_size(ow, g.kw, g.stride, g.pad.left, g.pad.right) != xs[3]) {
        throw std::invalid_argument("deconv2d: inconsistent geometry for input " + shape_string(xs));
    }

    const std::size_t patch = oc * g.kh * g.kw;
    const std::size_t grid = xs[2] * xs[3];
    const std::size_t out_plane = oc * oh * ow;
    Tensor x = input.value(), w = weight.value(), bv = bias.value();

    std::vector<double> out(batch * out_plane, 0.0);
    std::vector<double> col(patch * grid);
    for (std::size_t b = 0; b < batch; ++b) {
        detail::gemm(true, false, patch, grid, in_ch, 1.0, w.raw(), patch, x.raw() + b * in_ch * grid, grid, 0.0,
                     col.data(), grid);
        double* ob = out.data() + b * out_plane;
        col2im(g, col.data(), ob);
        for (std::size_t c = 0; c < oc; ++c) {
            for (std::size_t i = 0; i < oh * ow; ++i) ob[c * oh * ow + i] += bv[c];
        }
    }

    return input.tape()->record(
        "deconv2d", Tensor({batch, oc, oh, ow}, std::move(out)), {input, weight, bias},
        [=](const Tensor& dout, const std::vector<bool>& needs) {
            Grads grads(3);
            std::vector<double> dx(needs[0] ? batch * in_ch * grid : 0, 0.0);
            std::vector<double> dw(needs[1] ? in_ch * patch : 0, 0.0);
            std::vector<double> column(patch * grid);
            for (std::size_t b = 0; b < batch; ++b) {
                im2col(g, dout.raw() + b * out_plane, column.data());
                if (needs[0]) {
                    detail::gemm(false, false, in_ch, grid, patch, 1.0, w.raw(), patch, column.data(), grid, 0.0,
                                 dx.data() + b * in_ch * grid, grid);
                }
                if (needs[1]) {
                    detail::gemm(false, true, in_ch, patch, grid, 1.0, x.raw() + b * in_ch * grid, grid, column.data(),
                                 grid, 1.0, dw.data(), patch);
                }
            }
            if (needs[0]) grads[0] = Tensor(x.shape(), std::move(dx));
            if (needs[1]) grads[1] = Tensor(w.shape(), std::move(dw));
            if (needs[2]) grads[2] = Tensor({oc}, channel_bias_grad(dout, batch, oc, oh * ow));
            return grads;
        });
}

Var fully_connected(const Var& input, const Var& weight, const Var& bias) {
    require_rank(input, 2, "fully_connected", "input");
    require_rank(weight, 2, "fully_connected", "weight");
    if (input.shape()[1] != weight.shape()[0]) {
        throw std::invalid_argument("fully_connected: input " + shape_string(input.shape()) + " does not match weight " +
                                    shape_string(weight.shape()));
    }
    if (bias.shape() != Shape{weight.shape()[1]}) throw std::invalid_argument("fully_connected: bias must have shape [out]");
    return ops::add(ops::matmul(input, weight), ops::reshape(bias, {1, weight.shape()[1]}));
}

Var apply(const Var& input, const LayerParams& layer) {
    Tape& tape = *input.tape();
    Var w = tape.variable(layer.weight);
    Var b = tape.variable(layer.bias);
    switch (layer.kind) {
    case LayerKind::conv:
        return conv2d(input, w, b, layer.conv);
    case LayerKind::deconv:
        return deconv2d(input, w, b, layer.conv);
    case LayerKind::fc:
        return fully_connected(input, w, b);
    }
    throw std::logic_error("unknown layer kind");
}

Var activation(Activation kind, const Var& x, double leaky_slope) {
    switch (kind) {
    case Activation::identity:
        return x;
    case Activation::relu:
        return ops::relu(x);
    case Activation::leaky_relu:
        return ops::leaky_relu(x, leaky_slope);
    case Activation::tanh:
        return ops::tanh(x);
    case Activation::sigmoid:
        return ops::sigmoid(x);
    case Activation::softmax:
        return ops::softmax(x);
    }
    throw std::logic_error("unknown activation");
}

namespace {

struct ChannelLayout {
    std::size_t batch, channels, plane;
};

ChannelLayout channel_layout(const Shape& s, const char* op) {
    if (s.size() != 2 && s.size() != 4) {
        throw std::invalid_argument(std::string(op) + ": expected rank 2 or 4 input, got " + shape_string(s));
    }
    return {s[0], s[1], s.size() == 4 ? s[2] * s[3] : 1};
}

}  // namespace

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, double eps, Tensor* batch_mean, Tensor* batch_var) {
    const auto L = channel_layout(x.shape(), "batch_norm");
    if (gamma.shape() != Shape{L.channels} || beta.shape() != Shape{L.channels}) {
        throw std::invalid_argument("batch_norm: gamma/beta must have shape [" + std::to_string(L.channels) + "]");
    }
    const double count = static_cast<double>(L.batch * L.plane);
    const Tensor xv = x.value(), gv = gamma.value(), bv = beta.value();
    std::vector<double> mean(L.channels, 0.0), var(L.channels, 0.0), inv_std(L.channels);
    auto at = [&](std::size_t b, std::size_t c) { return (b * L.channels + c) * L.plane; };
    for (std::size_t b = 0; b < L.batch; ++b)
        for (std::size_t c = 0; c < L.channels; ++c)
            for (std::size_t i = 0; i < L.plane; ++i) mean[c] += xv[at(b, c) + i];
    for (auto& m : mean) m /= count;
    for (std::size_t b = 0; b < L.batch; ++b)
        for (std::size_t c = 0; c < L.channels; ++c)
            for (std::size_t i = 0; i < L.plane; ++i) {
                const double d = xv[at(b, c) + i] - mean[c];
                var[c] += d * d;
            }
    for (std::size_t c = 0; c < L.channels; ++c) {
        var[c] /= count;
        inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    }
    std::vector<double> xhat(xv.size()), out(xv.size());
    for (std::size_t b = 0; b < L.batch; ++b)
        for (std::size_t c = 0; c < L.channels; ++c)
            for (std::size_t i = 0; i < L.plane; ++i) {
                const auto j = at(b, c) + i;
                xhat[j] = (xv[j] - mean[c]) * inv_std[c];
                out[j] = gv[c] * xhat[j] + bv[c];
            }
    if (batch_mean) *batch_mean = Tensor({L.channels}, mean);
    if (batch_var) *batch_var = Tensor({L.channels}, var);

    return x.tape()->record(
        "batch_norm", Tensor(xv.shape(), std::move(out)), {x, gamma, beta},
        [L, xhat, inv_std, gv, count](const Tensor& g, const std::vector<bool>& needs) {
            auto at = [&](std::size_t b, std::size_t c) { return (b * L.channels + c) * L.plane; };
            std::vector<double> dgamma(L.channels, 0.0), dbeta(L.channels, 0.0);
            for (std::size_t b = 0; b < L.batch; ++b)
                for (std::size_t c = 0; c < L.channels; ++c)
                    for (std::size_t i = 0; i < L.plane; ++i) {
                        const auto j = at(b, c) + i;
                        dgamma[c] += g[j] * xhat[j];
                        dbeta[c] += g[j];
                    }
            Grads grads(3);
            if (needs[0]) {
                std::vector<double> dx(g.size());
                for (std::size_t b = 0; b < L.batch; ++b)
                    for (std::size_t c = 0; c < L.channels; ++c)
                        for (std::size_t i = 0; i < L.plane; ++i) {
                            const auto j = at(b, c) + i;
                            dx[j] = gv[c] * inv_std[c] / count * (count * g[j] - dbeta[c] - xhat[j] * dgamma[c]);
                        }
                grads[0] = Tensor(g.shape(), std::move(dx));
            }
            if (needs[1]) grads[1] = Tensor({L.channels}, std::move(dgamma));
            if (needs[2]) grads[2] = Tensor({L.channels}, std::move(dbeta));
            return grads;
        });
}

Var batch_norm_fixed(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean, const Tensor& var,
                     double eps) {
    const auto L = channel_layout(x.shape(), "batch_norm_fixed");
    Shape bshape = x.shape().size() == 4 ? Shape{1, L.channels, 1, 1} : Shape{1, L.channels};
    std::vector<double> inv(L.channels), shift(L.channels);
    for (std::size_t c = 0; c < L.channels; ++c) {
        inv[c] = 1.0 / std::sqrt(var[c] + eps);
        shift[c] = -mean[c] * inv[c];
    }
    Tape& tape = *x.tape();
    Var normalized = ops::add(ops::mul(x, tape.constant(Tensor(bshape, inv))), tape.constant(Tensor(bshape, shift)));
    return ops::add(ops::mul(normalized, ops::reshape(gamma, bshape)), ops::reshape(beta, bshape));
}

Tensor init_truncated_normal(const Shape& shape, double stddev, std::mt19937_64& rng) {
    if (!(stddev > 0.0)) throw std::invalid_argument("init_truncated_normal: stddev must be positive");
    std::normal_distribution<double> normal(0.0, stddev);
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) {
        do {
            v = normal(rng);
        } while (std::abs(v) > 2.0 * stddev);
    }
    return Tensor(shape, std::move(values));
}

Tensor init_truncated_normal(const Shape& shape, double stddev, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return init_truncated_normal(shape, stddev, rng);
}

}  // namespace fcgan::nn
