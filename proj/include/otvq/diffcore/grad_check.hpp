#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "otvq/diffcore/backward.hpp"

namespace otvq {

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Largest coordinatewise gap between the reverse-mode gradient of f at x and
/// a central difference with step h, each gap divided by max(1, |analytic|).
inline double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5) {
    const Tensor leaf = Tensor::parameter(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
    const Tensor y = f(leaf);
    if (y.size() != 1) throw ShapeError("grad_check: function must return a scalar");
    if (!std::isfinite(y.item())) throw NumericError("grad_check: f(x) is not finite");
    const Tensor analytic = backward(y).get(leaf);

    std::vector<double> probe(x.values().begin(), x.values().end());
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double x0 = probe[i];
        probe[i] = x0 + h;
        const double fp = f(Tensor::constant(x.shape(), probe)).item();
        probe[i] = x0 - h;
        const double fm = f(Tensor::constant(x.shape(), probe)).item();
        probe[i] = x0;
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic[i];
        worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
    return worst;
}

}  // namespace otvq
