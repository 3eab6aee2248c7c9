#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcgan/tensor.hpp"

namespace fcgan {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t id() const { return id_; }
    Tape* tape() const { return tape_; }
    bool requires_grad() const;

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Gradients of one scalar loss with respect to every node of a tape.
class Gradients {
public:
    /// Zeros of the variable's shape when the loss does not depend on it.
    Tensor of(const Var& v) const;
    bool contains(const Var& v) const;

private:
    friend class Tape;
    std::vector<std::optional<Tensor>> grads_;
};

/// Per-input gradient callback of a recorded primitive. `needs[i]` tells
/// whether input i wants a gradient; entries left empty are treated as zero.
using BackwardFn = std::function<std::vector<std::optional<Tensor>>(const Tensor& grad_out,
                                                                   const std::vector<bool>& needs)>;

/// Single-owner record of primitive operations for reverse-mode
/// differentiation. Nodes are appended in evaluation order, so reverse
/// index order is a reverse topological order.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that receives a gradient.
    Var variable(Tensor value);
    /// Leaf excluded from differentiation.
    Var constant(Tensor value);
    Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

    Gradients backward(const Var& loss) const;

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
    };
    std::deque<Node> nodes_;  // deque: Var::value() references survive later records
};

/// Differentiable primitives. Binary elementwise ops accept `b` with the
/// same rank as `a` where each dimension either matches or is 1.
namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var exp(const Var& a);
/// Throws std::domain_error on non-positive input.
Var log(const Var& a);
/// max(a, c) elementwise; the gradient passes where a > c.
Var maximum(const Var& a, double c);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);

Var matmul(const Var& a, const Var& b);

Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, Shape shape);
/// Concatenation along axis 0 or axis 1 (axis 1 for rank-2 inputs only).
Var concat(const std::vector<Var>& parts, std::size_t axis);
/// Rows [begin, end) along axis 0.
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
/// out[i] = a[i, index[i]] for a of shape [b, k]; output shape [b].
Var pick(const Var& a, std::span<const int> index);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
/// Softmax over the last axis.
Var softmax(const Var& a);

}  // namespace ops

}  // namespace fcgan
