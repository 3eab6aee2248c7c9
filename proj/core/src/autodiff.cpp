#include "fcgan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "blas.hpp"

namespace fcgan {

const Tensor& Var::value() const {
    if (tape_ == nullptr) throw std::logic_error("use of an unbound Var");
    return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(id_); }

Tensor Gradients::of(const Var& v) const {
    if (v.id() < grads_.size() && grads_[v.id()]) return *grads_[v.id()];
    return Tensor::zeros(v.shape());
}

bool Gradients::contains(const Var& v) const { return v.id() < grads_.size() && grads_[v.id()].has_value(); }

Var Tape::variable(Tensor value) {
    require_finite(value, "variable");
    nodes_.push_back(Node{std::move(value), {}, {}, true});
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    require_finite(value, "constant");
    nodes_.push_back(Node{std::move(value), {}, {}, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
    require_finite(value, op);
    Node node;
    node.value = std::move(value);
    for (const auto& in : inputs) {
        if (in.tape() != this) throw std::invalid_argument(std::string(op) + ": input recorded on a different tape");
        node.inputs.push_back(in.id());
        node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var& loss) const {
    if (loss.tape() != this || loss.id() >= nodes_.size()) {
        throw std::invalid_argument("backward: loss was not produced on this tape");
    }
    if (loss.value().size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
    }

    std::vector<std::optional<std::vector<double>>> acc(nodes_.size());
    Gradients out;
    out.grads_.resize(nodes_.size());
    acc[loss.id()] = std::vector<double>{1.0};

    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (!acc[id]) continue;
        Tensor grad_out(node.value.shape(), std::move(*acc[id]));
        acc[id].reset();
        if (node.requires_grad) out.grads_[id] = grad_out;
        if (!node.backward) continue;

        std::vector<bool> needs(node.inputs.size());
        for (std::size_t i = 0; i < node.inputs.size(); ++i) needs[i] = nodes_[node.inputs[i]].requires_grad;
        auto input_grads = node.backward(grad_out, needs);
        for (std::size_t i = 0; i < node.inputs.size(); ++i) {
            if (!needs[i] || i >= input_grads.size() || !input_grads[i]) continue;
            const Tensor& g = *input_grads[i];
            auto in = node.inputs[i];
            if (g.size() != nodes_[in].value.size()) throw std::logic_error("backward: gradient size mismatch");
            if (!acc[in]) {
                acc[in] = std::vector<double>(g.data().begin(), g.data().end());
            } else {
                auto& dst = *acc[in];
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j];
            }
        }
    }
    return out;
}

}  // namespace fcgan
