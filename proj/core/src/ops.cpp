#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "blas.hpp"
#include "fcgan/autodiff.hpp"

namespace fcgan::ops {

namespace {

using Grads = std::vector<std::optional<Tensor>>;

// Index map from an element of `a` to the broadcast element of `b`.
// `b` must have a's rank, each dimension equal or 1.
class Broadcast {
public:
    Broadcast(const Shape& a, const Shape& b, const char* op) : a_(a) {
        if (a == b) {
            same_ = true;
            return;
        }
        if (a.size() != b.size()) {
            throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                                        shape_string(b));
        }
        strides_.assign(a.size(), 0);
        std::size_t stride = 1;
        for (std::size_t i = a.size(); i-- > 0;) {
            if (b[i] != a[i] && b[i] != 1) {
                throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_string(b) + " to " +
                                            shape_string(a));
            }
            strides_[i] = b[i] == 1 ? 0 : stride;
            stride *= b[i];
        }
    }

    bool same() const { return same_; }

    std::vector<std::size_t> index_map() const {
        auto n = shape_size(a_);
        std::vector<std::size_t> map(n);
        if (same_) {
            for (std::size_t i = 0; i < n; ++i) map[i] = i;
            return map;
        }
        std::vector<std::size_t> counter(a_.size(), 0);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < n; ++i) {
            map[i] = offset;
            for (std::size_t ax = a_.size(); ax-- > 0;) {
                ++counter[ax];
                offset += strides_[ax];
                if (counter[ax] < a_[ax]) break;
                offset -= strides_[ax] * counter[ax];
                counter[ax] = 0;
            }
        }
        return map;
    }

private:
    Shape a_;
    std::vector<std::size_t> strides_;
    bool same_ = false;
};

Tensor reduce_to(const Tensor& grad, const Shape& target, const std::vector<std::size_t>& map) {
    std::vector<double> out(shape_size(target), 0.0);
    for (std::size_t i = 0; i < grad.size(); ++i) out[map[i]] += grad[i];
    return Tensor(target, std::move(out));
}

template <class F>
Tensor map_values(const Tensor& a, F f) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return Tensor(a.shape(), std::move(out));
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <class Fwd, class Deriv>
Var unary(const char* name, const Var& a, Fwd fwd, Deriv deriv) {
    Tensor y = map_values(a.value(), fwd);
    Tensor x = a.value();
    Tensor y_copy = y;
    return a.tape()->record(name, std::move(y), {a}, [x, y_copy, deriv](const Tensor& g, const std::vector<bool>&) {
        std::vector<double> dx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * deriv(x[i], y_copy[i]);
        return Grads{Tensor(x.shape(), std::move(dx))};
    });
}

enum class Binary { add, sub, mul };

Var binary(Binary kind, const char* name, const Var& a, const Var& b) {
    if (a.tape() != b.tape()) throw std::invalid_argument(std::string(name) + ": operands on different tapes");
    Broadcast bc(a.shape(), b.shape(), name);
    auto map = bc.index_map();
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double x = av[i], y = bv[map[i]];
        out[i] = kind == Binary::add ? x + y : kind == Binary::sub ? x - y : x * y;
    }
    Shape b_shape = b.shape();
    return a.tape()->record(name, Tensor(av.shape(), std::move(out)), {a, b},
                            [kind, av, bv, map, b_shape](const Tensor& g, const std::vector<bool>& needs) {
                                Grads grads(2);
                                if (needs[0]) {
                                    if (kind == Binary::mul) {
                                        std::vector<double> da(g.size());
                                        for (std::size_t i = 0; i < g.size(); ++i) da[i] = g[i] * bv[map[i]];
                                        grads[0] = Tensor(g.shape(), std::move(da));
                                    } else {
                                        grads[0] = g;
                                    }
                                }
                                if (needs[1]) {
                                    std::vector<double> db(g.size());
                                    for (std::size_t i = 0; i < g.size(); ++i) {
                                        db[i] = kind == Binary::add   ? g[i]
                                                : kind == Binary::sub ? -g[i]
                                                                      : g[i] * av[i];
                                    }
                                    grads[1] = reduce_to(Tensor(g.shape(), std::move(db)), b_shape, map);
                                }
                                return grads;
                            });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(Binary::add, "add", a, b); }
Var sub(const Var& a, const Var& b) { return binary(Binary::sub, "sub", a, b); }
Var mul(const Var& a, const Var& b) { return binary(Binary::mul, "mul", a, b); }

Var neg(const Var& a) {
    return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var exp(const Var& a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
    for (double v : a.value().data()) {
        if (!(v > 0.0)) throw std::domain_error("log of non-positive value " + std::to_string(v));
    }
    return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var maximum(const Var& a, double c) {
    return unary(
        "maximum", a, [c](double x) { return std::max(x, c); }, [c](double x, double) { return x > c ? 1.0 : 0.0; });
}

Var scale(const Var& a, double c) {
    return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(const Var& a, double c) {
    return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var relu(const Var& a) {
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
    return unary(
        "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var tanh(const Var& a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var matmul(const Var& a, const Var& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_string(a.shape()) + " x " +
                                    shape_string(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor av = a.value(), bv = b.value();
    std::vector<double> out(m * n, 0.0);
    detail::gemm(false, false, m, n, k, 1.0, av.raw(), k, bv.raw(), n, 0.0, out.data(), n);
    return a.tape()->record("matmul", Tensor({m, n}, std::move(out)), {a, b},
                            [av, bv, m, k, n](const Tensor& g, const std::vector<bool>& needs) {
                                Grads grads(2);
                                if (needs[0]) {
                                    std::vector<double> da(m * k, 0.0);
                                    detail::gemm(false, true, m, k, n, 1.0, g.raw(), n, bv.raw(), n, 0.0, da.data(), k);
                                    grads[0] = Tensor({m, k}, std::move(da));
                                }
                                if (needs[1]) {
                                    std::vector<double> db(k * n, 0.0);
                                    detail::gemm(true, false, k, n, m, 1.0, av.raw(), k, g.raw(), n, 0.0, db.data(), n);
                                    grads[1] = Tensor({k, n}, std::move(db));
                                }
                                return grads;
                            });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    Shape shape = a.shape();
    return a.tape()->record("sum", Tensor::scalar(s), {a}, [shape](const Tensor& g, const std::vector<bool>&) {
        return Grads{Tensor::full(shape, g.item())};
    });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var reshape(const Var& a, Shape shape) {
    Shape original = a.shape();
    return a.tape()->record("reshape", a.value().reshaped(std::move(shape)), {a},
                            [original](const Tensor& g, const std::vector<bool>&) {
                                return Grads{g.reshaped(original)};
                            });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (axis > 1 || (axis == 1 && first.size() != 2) || first.empty()) {
        throw std::invalid_argument("concat: unsupported axis " + std::to_string(axis) + " for shape " +
                                    shape_string(first));
    }
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
        if (!ok) throw std::invalid_argument("concat: incompatible shapes " + shape_string(first) + " and " + shape_string(s));
        widths.push_back(s[axis]);
        total += s[axis];
    }
    Shape out_shape = first;
    out_shape[axis] = total;
    std::vector<double> out;
    out.reserve(shape_size(out_shape));
    if (axis == 0) {
        for (const auto& p : parts) out.insert(out.end(), p.value().data().begin(), p.value().data().end());
    } else {
        const std::size_t rows = first[0];
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < parts.size(); ++j) {
                auto d = parts[j].value().data().subspan(r * widths[j], widths[j]);
                out.insert(out.end(), d.begin(), d.end());
            }
        }
    }
    std::vector<Shape> shapes;
    for (const auto& p : parts) shapes.push_back(p.shape());
    return parts.front().tape()->record(
        "concat", Tensor(out_shape, std::move(out)), parts,
        [axis, widths, shapes, total](const Tensor& g, const std::vector<bool>& needs) {
            Grads grads(shapes.size());
            auto gd = g.data();
            if (axis == 0) {
                std::size_t offset = 0;
                for (std::size_t j = 0; j < shapes.size(); ++j) {
                    auto n = shape_size(shapes[j]);
                    if (needs[j]) {
                        auto part = gd.subspan(offset, n);
                        grads[j] = Tensor(shapes[j], std::vector<double>(part.begin(), part.end()));
                    }
                    offset += n;
                }
            } else {
                const std::size_t rows = shapes.front()[0];
                std::size_t col = 0;
                for (std::size_t j = 0; j < shapes.size(); ++j) {
                    if (needs[j]) {
                        std::vector<double> part;
                        part.reserve(rows * widths[j]);
                        for (std::size_t r = 0; r < rows; ++r) {
                            auto row = gd.subspan(r * total + col, widths[j]);
                            part.insert(part.end(), row.begin(), row.end());
                        }
                        grads[j] = Tensor(shapes[j], std::move(part));
                    }
                    col += widths[j];
                }
            }
            return grads;
        });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
    const Shape& shape = a.shape();
    if (shape.empty() || begin >= end || end > shape[0]) {
        throw std::invalid_argument("slice_rows: invalid range [" + std::to_string(begin) + "," + std::to_string(end) +
                                    ") for shape " + shape_string(shape));
    }
    const std::size_t row = a.value().size() / shape[0];
    Shape out_shape = shape;
    out_shape[0] = end - begin;
    auto d = a.value().data().subspan(begin * row, (end - begin) * row);
    Shape full = shape;
    return a.tape()->record("slice_rows", Tensor(out_shape, std::vector<double>(d.begin(), d.end())), {a},
                            [full, begin, row](const Tensor& g, const std::vector<bool>&) {
                                std::vector<double> out(shape_size(full), 0.0);
                                std::copy(g.data().begin(), g.data().end(), out.begin() + begin * row);
                                return Grads{Tensor(full, std::move(out))};
                            });
}

Var pick(const Var& a, std::span<const int> index) {
    const Shape& shape = a.shape();
    if (shape.size() != 2 || index.size() != shape[0]) {
        throw std::invalid_argument("pick: expected [b,k] input with b indices, got " + shape_string(shape) + " and " +
                                    std::to_string(index.size()) + " indices");
    }
    const std::size_t rows = shape[0], cols = shape[1];
    std::vector<std::size_t> idx(rows);
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= cols) {
            throw std::out_of_range("pick: index " + std::to_string(index[r]) + " out of range [0," +
                                    std::to_string(cols) + ")");
        }
        idx[r] = static_cast<std::size_t>(index[r]);
        out[r] = a.value()[r * cols + idx[r]];
    }
    Shape full = shape;
    return a.tape()->record("pick", Tensor({rows}, std::move(out)), {a},
                            [full, idx, cols](const Tensor& g, const std::vector<bool>&) {
                                std::vector<double> da(shape_size(full), 0.0);
                                for (std::size_t r = 0; r < idx.size(); ++r) da[r * cols + idx[r]] = g[r];
                                return Grads{Tensor(full, std::move(da))};
                            });
}

Var softmax(const Var& a) {
    const Shape& shape = a.shape();
    if (shape.empty()) throw std::invalid_argument("softmax: scalar input");
    const std::size_t k = shape.back();
    const std::size_t rows = a.value().size() / k;
    std::vector<double> out(a.value().size());
    for (std::size_t r = 0; r < rows; ++r) {
        auto x = a.value().data().subspan(r * k, k);
        double mx = *std::max_element(x.begin(), x.end());
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            out[r * k + j] = std::exp(x[j] - mx);
            z += out[r * k + j];
        }
        for (std::size_t j = 0; j < k; ++j) out[r * k + j] /= z;
    }
    Tensor y(shape, std::move(out));
    Tensor y_copy = y;
    return a.tape()->record("softmax", std::move(y), {a}, [y_copy, k, rows](const Tensor& g, const std::vector<bool>&) {
        std::vector<double> dx(g.size());
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += g[r * k + j] * y_copy[r * k + j];
            for (std::size_t j = 0; j < k; ++j) dx[r * k + j] = y_copy[r * k + j] * (g[r * k + j] - dot);
        }
        return Grads{Tensor(y_copy.shape(), std::move(dx))};
    });
}

}  // namespace fcgan::ops
