#include "fcgan/parameters.hpp"

#include <cstring>
#include <stdexcept>

namespace fcgan {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    auto p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

}  // namespace

void ParameterSet::add(std::string name, Tensor value) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    entries_.push_back({std::move(name), std::move(value)});
}

std::size_t ParameterSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return i;
    }
    throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

const Tensor& ParameterSet::at(std::string_view name) const { return entries_[index_of(name)].value; }

bool ParameterSet::contains(std::string_view name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

void ParameterSet::set(std::size_t index, Tensor value) {
    auto& e = entries_.at(index);
    if (e.value.shape() != value.shape()) {
        throw std::invalid_argument("parameter '" + e.name + "' shape " + shape_string(e.value.shape()) +
                                    " cannot be replaced by " + shape_string(value.shape()));
    }
    e.value = std::move(value);
}

void ParameterSet::set(std::string_view name, Tensor value) { set(index_of(name), std::move(value)); }

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

std::uint64_t ParameterSet::fingerprint() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& e : entries_) {
        fnv_bytes(h, e.name.data(), e.name.size());
        for (auto d : e.value.shape()) fnv_bytes(h, &d, sizeof(d));
        fnv_bytes(h, e.value.raw(), e.value.size() * sizeof(double));
    }
    return h;
}

BoundParameters::BoundParameters(Tape& tape, const ParameterSet& params, bool trainable) : params_(&params) {
    vars_.reserve(params.size());
    for (const auto& e : params.entries()) vars_.push_back(trainable ? tape.variable(e.value) : tape.constant(e.value));
}

const Var& BoundParameters::operator[](std::string_view name) const {
    const auto& entries = params_->entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].name == name) return vars_[i];
    }
    throw std::out_of_range("no bound parameter named '" + std::string(name) + "'");
}

std::vector<Tensor> BoundParameters::gradients(const Gradients& grads) const {
    std::vector<Tensor> out;
    out.reserve(vars_.size());
    for (const auto& v : vars_) out.push_back(grads.of(v));
    return out;
}

}  // namespace fcgan
