#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fcgan/autodiff.hpp"
#include "fcgan/layers.hpp"
#include "fcgan/parameters.hpp"

namespace fcgan {

/// FC-GAN's classifier head has N+1 outputs (the last is C_fake); the
/// AC-GAN baseline has N.
enum class Variant { fcgan, acgan };

/// conv: the convolutional MNIST/CIFAR stack. mlp: fully connected
/// stack for low-dimensional toy data.
enum class Architecture { conv, mlp };

std::string to_string(Variant v);
std::string to_string(Architecture a);
Variant parse_variant(const std::string& s);
Architecture parse_architecture(const std::string& s);

std::size_t class_head_width(Variant v, std::size_t num_classes);

enum class SourceLabel { real, fake };

struct NetworkOptions {
    bool batch_norm = true;
    double leaky_slope = 0.2;
    double init_stddev = 0.02;
    std::size_t mlp_hidden = 128;
    std::size_t mlp_layers = 2;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

struct GeneratorSpec {
    Architecture arch = Architecture::conv;
    std::size_t noise_dim = 100;
    std::size_t num_classes = 10;
    Shape sample_shape{1, 28, 28};
    NetworkOptions net;
};

struct DiscriminatorSpec {
    Architecture arch = Architecture::conv;
    std::size_t num_classes = 10;
    std::size_t class_outputs = 11;
    Shape sample_shape{1, 28, 28};
    NetworkOptions net;
};

DiscriminatorSpec discriminator_spec_for(const GeneratorSpec& g, Variant variant);

/// Generator input: z in [-1,1]^noise_dim and a real class label per row.
struct LatentInput {
    Tensor z;
    std::vector<int> labels;
};

LatentInput sample_latent(std::size_t batch, std::size_t noise_dim, std::size_t num_classes, std::mt19937_64& rng);

/// One-hot rows [b, num_classes]; throws std::out_of_range on a bad label.
Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

struct RunMode {
    bool training = true;
    bool update_statistics = false;
};

inline constexpr RunMode kInference{false, false};

struct StageShape {
    std::string name;
    Shape output;  // per sample
};

namespace detail {
struct Stage {
    std::string name;
    nn::LayerKind kind = nn::LayerKind::fc;
    std::size_t out = 0;
    std::size_t kernel = 0;
    nn::ConvOptions conv;
    bool batch_norm = false;
    nn::Activation act = nn::Activation::identity;
    Shape reshape_to;  // per sample, applied after the activation
};

/// Layer stack with parameters and batch-norm running statistics.
class Network {
public:
    Network() = default;
    Network(std::vector<Stage> stages, Shape input_shape, const NetworkOptions& opts, std::mt19937_64& rng);

    Var forward(const BoundParameters& params, Var x, RunMode mode);

    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }
    ParameterSet& buffers() { return buffers_; }
    const ParameterSet& buffers() const { return buffers_; }
    const std::vector<StageShape>& shapes() const { return shapes_; }

private:
    std::vector<Stage> stages_;
    NetworkOptions opts_;
    ParameterSet params_;
    ParameterSet buffers_;
    std::vector<StageShape> shapes_;
};
}  // namespace detail

class Generator {
public:
    Generator(GeneratorSpec spec, std::uint64_t seed);

    const GeneratorSpec& spec() const { return spec_; }
    ParameterSet& parameters() { return net_.parameters(); }
    const ParameterSet& parameters() const { return net_.parameters(); }
    /// Batch-norm running statistics.
    ParameterSet& buffers() { return net_.buffers(); }
    const ParameterSet& buffers() const { return net_.buffers(); }
    /// Per-stage output shapes, excluding the batch axis.
    const std::vector<StageShape>& stage_shapes() const { return net_.shapes(); }

    /// z [b, noise_dim] plus labels in [0,N) -> samples [b, sample_shape...].
    Var forward(const BoundParameters& params, const Var& z, std::span<const int> labels, RunMode mode);

    /// Forward pass on a private tape.
    Tensor generate(const LatentInput& input, RunMode mode = kInference);

private:
    GeneratorSpec spec_;
    detail::Network net_;
};

struct DiscriminatorOutput {
    Var p_source;     // [b,1], probability of S = real
    Var class_probs;  // [b, class_outputs]
};

class Discriminator {
public:
    Discriminator(DiscriminatorSpec spec, std::uint64_t seed);

    const DiscriminatorSpec& spec() const { return spec_; }
    ParameterSet& parameters() { return net_.parameters(); }
    const ParameterSet& parameters() const { return net_.parameters(); }
    ParameterSet& buffers() { return net_.buffers(); }
    const ParameterSet& buffers() const { return net_.buffers(); }
    const std::vector<StageShape>& stage_shapes() const { return shapes_; }

    DiscriminatorOutput forward(const BoundParameters& params, const Var& x, RunMode mode);

    /// Forward pass on a private tape: (p_source, class_probs).
    std::pair<Tensor, Tensor> discriminate(const Tensor& x, RunMode mode = kInference);

private:
    DiscriminatorSpec spec_;
    detail::Network net_;
    std::vector<StageShape> shapes_;
};

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed);
Discriminator build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

}  // namespace fcgan
