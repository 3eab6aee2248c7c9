#include "fcgan/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fcgan {

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
    if (!(config.learning_rate > 0.0) || config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 ||
        config.beta2 >= 1.0 || !(config.epsilon > 0.0)) {
        throw std::invalid_argument("invalid Adam hyperparameters");
    }
    for (const auto& e : params.entries()) {
        m_.add(e.name, Tensor::zeros(e.value.shape()));
        v_.add(e.name, Tensor::zeros(e.value.shape()));
    }
}

void Adam::step(ParameterSet& params, const std::vector<Tensor>& grads) {
    if (grads.size() != params.size() || m_.size() != params.size()) {
        throw std::invalid_argument("adam: expected " + std::to_string(params.size()) + " gradients, got " +
                                    std::to_string(grads.size()));
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const auto& p = params.entries()[i];
        if (grads[i].shape() != p.value.shape()) {
            throw std::invalid_argument("adam: gradient for '" + p.name + "' has shape " +
                                        shape_string(grads[i].shape()) + ", parameter has " +
                                        shape_string(p.value.shape()));
        }
        if (!grads[i].all_finite()) throw NonFiniteError("adam: non-finite gradient for '" + p.name + "'");
    }

    const std::uint64_t t = t_ + 1;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const Tensor& g = grads[i];
        const Tensor& theta = params.entries()[i].value;
        const Tensor& m_old = m_.entries()[i].value;
        const Tensor& v_old = v_.entries()[i].value;
        std::vector<double> m(g.size()), v(g.size()), next(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) {
            m[j] = b1 * m_old[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v_old[j] + (1.0 - b2) * g[j] * g[j];
            next[j] = theta[j] - config_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.epsilon);
        }
        m_.set(i, Tensor(g.shape(), std::move(m)));
        v_.set(i, Tensor(g.shape(), std::move(v)));
        params.set(i, Tensor(g.shape(), std::move(next)));
    }
    t_ = t;
}

void Adam::restore(std::uint64_t steps, ParameterSet first_moment, ParameterSet second_moment) {
    auto same_layout = [this](const ParameterSet& a) {
        if (a.size() != m_.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a.entries()[i].name != m_.entries()[i].name ||
                a.entries()[i].value.shape() != m_.entries()[i].value.shape()) {
                return false;
            }
        }
        return true;
    };
    if (!same_layout(first_moment) || !same_layout(second_moment)) {
        throw std::invalid_argument("adam: restored moments do not match the parameter layout");
    }
    t_ = steps;
    m_ = std::move(first_moment);
    v_ = std::move(second_moment);
}

}  // namespace fcgan
