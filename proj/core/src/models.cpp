#include "fcgan/models.hpp"

#include <stdexcept>

namespace fcgan {

std::string to_string(Variant v) { return v == Variant::fcgan ? "fcgan" : "acgan"; }

std::string to_string(Architecture a) { return a == Architecture::conv ? "conv" : "mlp"; }

Variant parse_variant(const std::string& s) {
    if (s == "fcgan") return Variant::fcgan;
    if (s == "acgan") return Variant::acgan;
    throw std::invalid_argument("unknown model variant '" + s + "' (expected fcgan or acgan)");
}

Architecture parse_architecture(const std::string& s) {
    if (s == "conv") return Architecture::conv;
    if (s == "mlp") return Architecture::mlp;
    throw std::invalid_argument("unknown architecture '" + s + "' (expected conv or mlp)");
}

std::size_t class_head_width(Variant v, std::size_t num_classes) {
    return v == Variant::fcgan ? num_classes + 1 : num_classes;
}

DiscriminatorSpec discriminator_spec_for(const GeneratorSpec& g, Variant variant) {
    DiscriminatorSpec d;
    d.arch = g.arch;
    d.num_classes = g.num_classes;
    d.class_outputs = class_head_width(variant, g.num_classes);
    d.sample_shape = g.sample_shape;
    d.net = g.net;
    return d;
}

LatentInput sample_latent(std::size_t batch, std::size_t noise_dim, std::size_t num_classes, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    std::uniform_int_distribution<int> label(0, static_cast<int>(num_classes) - 1);
    std::vector<double> z(batch * noise_dim);
    for (auto& v : z) v = uniform(rng);
    std::vector<int> labels(batch);
    for (auto& l : labels) l = label(rng);
    return {Tensor({batch, noise_dim}, std::move(z)), std::move(labels)};
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
    std::vector<double> out(labels.size() * num_classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0," + std::to_string(num_classes) +
                                    ")");
        }
        out[i * num_classes + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    return Tensor({labels.size(), num_classes}, std::move(out));
}

namespace detail {

Network::Network(std::vector<Stage> stages, Shape input_shape, const NetworkOptions& opts, std::mt19937_64& rng)
    : stages_(std::move(stages)), opts_(opts) {
    Shape shape = std::move(input_shape);
    for (const auto& st : stages_) {
        Shape weight_shape;
        switch (st.kind) {
        case nn::LayerKind::fc:
            weight_shape = {shape_size(shape), st.out};
            shape = {st.out};
            break;
        case nn::LayerKind::conv:
            if (shape.size() != 3) throw std::invalid_argument("stage " + st.name + ": conv needs a [c,h,w] input");
            weight_shape = {st.out, shape[0], st.kernel, st.kernel};
            shape = {st.out,
                     nn::conv_output_size(shape[1], st.kernel, st.conv.stride, st.conv.padding.top, st.conv.padding.bottom),
                     nn::conv_output_size(shape[2], st.kernel, st.conv.stride, st.conv.padding.left, st.conv.padding.right)};
            break;
        case nn::LayerKind::deconv:
            if (shape.size() != 3) throw std::invalid_argument("stage " + st.name + ": deconv needs a [c,h,w] input");
            weight_shape = {shape[0], st.out, st.kernel, st.kernel};
            shape = {st.out,
                     nn::deconv_output_size(shape[1], st.kernel, st.conv.stride, st.conv.padding.top,
                                            st.conv.padding.bottom, st.conv.output_padding),
                     nn::deconv_output_size(shape[2], st.kernel, st.conv.stride, st.conv.padding.left,
                                            st.conv.padding.right, st.conv.output_padding)};
            break;
        }
        params_.add(st.name + ".weight", nn::init_truncated_normal(weight_shape, opts.init_stddev, rng));
        params_.add(st.name + ".bias", Tensor::zeros({st.out}));
        if (st.batch_norm) {
            params_.add(st.name + ".bn.gamma", Tensor::full({st.out}, 1.0));
            params_.add(st.name + ".bn.beta", Tensor::zeros({st.out}));
            buffers_.add(st.name + ".bn.running_mean", Tensor::zeros({st.out}));
            buffers_.add(st.name + ".bn.running_var", Tensor::full({st.out}, 1.0));
        }
        if (!st.reshape_to.empty()) {
            if (shape_size(st.reshape_to) != shape_size(shape)) {
                throw std::invalid_argument("stage " + st.name + ": cannot reshape " + shape_string(shape) + " to " +
                                            shape_string(st.reshape_to));
            }
            shape = st.reshape_to;
        }
        shapes_.push_back({st.name, shape});
    }
}

Var Network::forward(const BoundParameters& params, Var x, RunMode mode) {
    const std::size_t batch = x.shape()[0];
    for (const auto& st : stages_) {
        const Var& w = params[st.name + ".weight"];
        const Var& b = params[st.name + ".bias"];
        switch (st.kind) {
        case nn::LayerKind::fc:
            if (x.shape().size() != 2) x = ops::reshape(x, {batch, x.value().size() / batch});
            x = nn::fully_connected(x, w, b);
            break;
        case nn::LayerKind::conv:
            x = nn::conv2d(x, w, b, st.conv);
            break;
        case nn::LayerKind::deconv:
            x = nn::deconv2d(x, w, b, st.conv);
            break;
        }
        if (st.batch_norm) {
            const Var& gamma = params[st.name + ".bn.gamma"];
            const Var& beta = params[st.name + ".bn.beta"];
            const std::string mean_name = st.name + ".bn.running_mean";
            const std::string var_name = st.name + ".bn.running_var";
            if (mode.training) {
                Tensor mean, var;
                x = nn::batch_norm(x, gamma, beta, opts_.bn_eps, &mean, &var);
                if (mode.update_statistics) {
                    const double m = opts_.bn_momentum;
                    const Tensor& rm = buffers_.at(mean_name);
                    const Tensor& rv = buffers_.at(var_name);
                    std::vector<double> new_mean(rm.size()), new_var(rv.size());
                    for (std::size_t i = 0; i < rm.size(); ++i) {
                        new_mean[i] = (1.0 - m) * rm[i] + m * mean[i];
                        new_var[i] = (1.0 - m) * rv[i] + m * var[i];
                    }
                    buffers_.set(mean_name, Tensor(rm.shape(), std::move(new_mean)));
                    buffers_.set(var_name, Tensor(rv.shape(), std::move(new_var)));
                }
            } else {
                x = nn::batch_norm_fixed(x, gamma, beta, buffers_.at(mean_name), buffers_.at(var_name), opts_.bn_eps);
            }
        }
        x = nn::activation(st.act, x, opts_.leaky_slope);
        if (!st.reshape_to.empty()) {
            Shape s{batch};
            s.insert(s.end(), st.reshape_to.begin(), st.reshape_to.end());
            x = ops::reshape(x, s);
        }
    }
    return x;
}

}  // namespace detail

namespace {

using detail::Stage;

nn::ConvOptions conv_opts(std::size_t stride, nn::Padding pad, std::size_t output_padding = 0) {
    return {stride, pad, output_padding};
}

std::vector<Stage> generator_stages(const GeneratorSpec& spec) {
    const bool bn = spec.net.batch_norm;
    std::vector<Stage> stages;
    if (spec.arch == Architecture::mlp) {
        if (spec.sample_shape.size() != 1) throw std::invalid_argument("mlp generator needs a flat sample shape");
        for (std::size_t i = 0; i < spec.net.mlp_layers; ++i) {
            stages.push_back({"fc" + std::to_string(i + 1), nn::LayerKind::fc, spec.net.mlp_hidden, 0, {}, bn,
                              nn::Activation::relu, {}});
        }
        stages.push_back({"out", nn::LayerKind::fc, spec.sample_shape[0], 0, {}, false, nn::Activation::tanh, {}});
        return stages;
    }
    if (spec.sample_shape.size() != 3) throw std::invalid_argument("conv generator needs a [c,h,w] sample shape");
    const std::size_t c = spec.sample_shape[0], h = spec.sample_shape[1], w = spec.sample_shape[2];
    if (h % 4 != 0 || w % 4 != 0 || h < 8 || w < 8) {
        throw std::invalid_argument("conv generator needs image sides divisible by 4, got " +
                                    shape_string(spec.sample_shape));
    }
    const Shape base{128, h / 4, w / 4};
    stages.push_back({"fc1", nn::LayerKind::fc, 1024, 0, {}, bn, nn::Activation::relu, {}});
    stages.push_back({"fc2", nn::LayerKind::fc, shape_size(base), 0, {}, bn, nn::Activation::relu, base});
    // 5x5 stride 2: (n-1)*2 - 4 + 5 + 1 = 2n
    stages.push_back({"deconv1", nn::LayerKind::deconv, 256, 5, conv_opts(2, nn::Padding::uniform(2), 1), bn,
                      nn::Activation::relu, {}});
    stages.push_back({"deconv2", nn::LayerKind::deconv, 128, 5, conv_opts(2, nn::Padding::uniform(2), 1), bn,
                      nn::Activation::relu, {}});
    // 2x2 stride 1 keeps the size with one row/column of padding on the leading side.
    stages.push_back({"conv3", nn::LayerKind::conv, c, 2, conv_opts(1, nn::Padding{1, 0, 1, 0}), false,
                      nn::Activation::tanh, {}});
    return stages;
}

std::vector<Stage> discriminator_trunk(const DiscriminatorSpec& spec) {
    const bool bn = spec.net.batch_norm;
    const auto act = nn::Activation::leaky_relu;
    std::vector<Stage> stages;
    if (spec.arch == Architecture::mlp) {
        if (spec.sample_shape.size() != 1) throw std::invalid_argument("mlp discriminator needs a flat sample shape");
        // No batch norm: per-batch statistics of all-real or all-fake 2-d batches erase where the points lie.
        for (std::size_t i = 0; i < spec.net.mlp_layers; ++i) {
            stages.push_back({"fc" + std::to_string(i + 1), nn::LayerKind::fc, spec.net.mlp_hidden, 0, {}, false, act, {}});
        }
        return stages;
    }
    if (spec.sample_shape.size() != 3) throw std::invalid_argument("conv discriminator needs a [c,h,w] sample shape");
    const auto p1 = nn::Padding::uniform(1);
    stages.push_back({"conv1", nn::LayerKind::conv, 32, 3, conv_opts(2, p1), false, act, {}});
    stages.push_back({"conv2", nn::LayerKind::conv, 64, 3, conv_opts(1, p1), bn, act, {}});
    stages.push_back({"conv3", nn::LayerKind::conv, 128, 3, conv_opts(2, p1), bn, act, {}});
    stages.push_back({"conv4", nn::LayerKind::conv, 256, 3, conv_opts(1, p1), bn, act, {}});
    return stages;
}

void check_batch_shape(const Shape& actual, const Shape& sample, const char* what) {
    Shape expected{actual.empty() ? 0 : actual[0]};
    expected.insert(expected.end(), sample.begin(), sample.end());
    if (actual.empty() || actual != expected) {
        throw std::invalid_argument(std::string(what) + ": expected [batch," + shape_string(sample).substr(1) +
                                    ", got " + shape_string(actual));
    }
}

}  // namespace

Generator::Generator(GeneratorSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    if (spec_.num_classes == 0 || spec_.noise_dim == 0) throw std::invalid_argument("generator needs classes and noise");
    std::mt19937_64 rng(seed);
    net_ = detail::Network(generator_stages(spec_), {spec_.noise_dim + spec_.num_classes}, spec_.net, rng);
    if (net_.shapes().back().output != spec_.sample_shape) {
        throw std::invalid_argument("generator stack produces " + shape_string(net_.shapes().back().output) +
                                    ", expected " + shape_string(spec_.sample_shape));
    }
}

Var Generator::forward(const BoundParameters& params, const Var& z, std::span<const int> labels, RunMode mode) {
    if (z.shape().size() != 2 || z.shape()[1] != spec_.noise_dim || z.shape()[0] != labels.size()) {
        throw std::invalid_argument("generator: z must be [" + std::to_string(labels.size()) + "," +
                                    std::to_string(spec_.noise_dim) + "], got " + shape_string(z.shape()));
    }
    Var cond = z.tape()->constant(one_hot(labels, spec_.num_classes));
    return net_.forward(params, ops::concat({z, cond}, 1), mode);
}

Tensor Generator::generate(const LatentInput& input, RunMode mode) {
    Tape tape;
    BoundParameters params(tape, parameters(), false);
    return forward(params, tape.constant(input.z), input.labels, mode).value();
}

Discriminator::Discriminator(DiscriminatorSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    if (spec_.class_outputs < spec_.num_classes || spec_.class_outputs > spec_.num_classes + 1) {
        throw std::invalid_argument("discriminator class head must have N or N+1 outputs");
    }
    std::mt19937_64 rng(seed);
    net_ = detail::Network(discriminator_trunk(spec_), spec_.sample_shape, spec_.net, rng);
    shapes_ = net_.shapes();
    const std::size_t features = shape_size(shapes_.back().output);
    auto& p = net_.parameters();
    p.add("source.weight", nn::init_truncated_normal({features, 1}, spec_.net.init_stddev, rng));
    p.add("source.bias", Tensor::zeros({1}));
    p.add("class.weight", nn::init_truncated_normal({features, spec_.class_outputs}, spec_.net.init_stddev, rng));
    p.add("class.bias", Tensor::zeros({spec_.class_outputs}));
    shapes_.push_back({"source", {1}});
    shapes_.push_back({"class", {spec_.class_outputs}});
}

DiscriminatorOutput Discriminator::forward(const BoundParameters& params, const Var& x, RunMode mode) {
    check_batch_shape(x.shape(), spec_.sample_shape, "discriminator input");
    Var h = net_.forward(params, x, mode);
    const std::size_t batch = x.shape()[0];
    if (h.shape().size() != 2) h = ops::reshape(h, {batch, h.value().size() / batch});
    Var source = ops::sigmoid(nn::fully_connected(h, params["source.weight"], params["source.bias"]));
    Var cls = ops::softmax(nn::fully_connected(h, params["class.weight"], params["class.bias"]));
    return {source, cls};
}

std::pair<Tensor, Tensor> Discriminator::discriminate(const Tensor& x, RunMode mode) {
    Tape tape;
    BoundParameters params(tape, parameters(), false);
    auto out = forward(params, tape.constant(x), mode);
    return {out.p_source.value(), out.class_probs.value()};
}

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed) { return Generator(spec, seed); }

Discriminator build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
    return Discriminator(spec, seed);
}

}  // namespace fcgan
