#pragma once

#include <cstdint>
#include <vector>

#include "fcgan/parameters.hpp"

namespace fcgan {

struct AdamConfig {
    double learning_rate = 0.00002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. One instance per parameter set.
class Adam {
public:
    Adam() = default;
    Adam(const ParameterSet& params, AdamConfig config);

    /// Updates `params` in place. Throws on shape mismatch or a non-finite
    /// gradient, leaving parameters and state untouched.
    void step(ParameterSet& params, const std::vector<Tensor>& grads);

    const AdamConfig& config() const { return config_; }
    std::uint64_t steps() const { return t_; }
    const ParameterSet& first_moment() const { return m_; }
    const ParameterSet& second_moment() const { return v_; }

    /// Restores serialized state; moments must mirror the parameter shapes.
    void restore(std::uint64_t steps, ParameterSet first_moment, ParameterSet second_moment);

private:
    AdamConfig config_;
    std::uint64_t t_ = 0;
    ParameterSet m_;
    ParameterSet v_;
};

}  // namespace fcgan
