#include "fcgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fcgan {

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_gradient: eps must be positive");
    std::vector<double> probe(x.data().begin(), x.data().end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double hi = f(Tensor(x.shape(), probe));
        probe[i] = saved - eps;
        const double lo = f(Tensor(x.shape(), probe));
        probe[i] = saved;
        if (!std::isfinite(hi) || !std::isfinite(lo)) {
            throw NonFiniteError("finite_diff_gradient: non-finite function value at coordinate " + std::to_string(i));
        }
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return Tensor(x.shape(), std::move(grad));
}

double gradient_relative_error(const Tensor& analytic, const Tensor& numeric) {
    if (analytic.size() != numeric.size()) throw std::invalid_argument("gradient_relative_error: size mismatch");
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace fcgan
