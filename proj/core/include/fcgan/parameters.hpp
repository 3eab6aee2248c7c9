#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fcgan/autodiff.hpp"
#include "fcgan/tensor.hpp"

namespace fcgan {

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Ordered, named collection of tensors (weights or buffers).
class ParameterSet {
public:
    void add(std::string name, Tensor value);
    const Tensor& at(std::string_view name) const;
    bool contains(std::string_view name) const;
    /// Replace by index; the shape must not change.
    void set(std::size_t index, Tensor value);
    void set(std::string_view name, Tensor value);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<NamedTensor>& entries() const { return entries_; }
    std::size_t scalar_count() const;

    /// FNV-1a over names, shapes and raw bytes.
    std::uint64_t fingerprint() const;

private:
    std::size_t index_of(std::string_view name) const;
    std::vector<NamedTensor> entries_;
};

/// A ParameterSet placed on a tape, either as differentiable leaves or as
/// constants (frozen).
class BoundParameters {
public:
    BoundParameters(Tape& tape, const ParameterSet& params, bool trainable);

    const Var& operator[](std::string_view name) const;
    /// Gradients aligned with the ParameterSet's order.
    std::vector<Tensor> gradients(const Gradients& grads) const;

private:
    const ParameterSet* params_;
    std::vector<Var> vars_;
};

}  // namespace fcgan
