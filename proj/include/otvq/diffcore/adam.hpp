#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "otvq/diffcore/backward.hpp"
#include "otvq/diffcore/tensor.hpp"

namespace otvq {

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moments for one parameter group. Slot i belongs to the i-th parameter
/// passed to adam_step; the slots are sized on the first step.
struct AdamState {
    AdamHyper hyper;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    AdamState() = default;
    explicit AdamState(AdamHyper h) : hyper(h) {}
};

// One bias-corrected Adam step. Returns fresh parameter leaves; the inputs are
// left untouched (tensors are immutable).
inline std::vector<Tensor> adam_step(std::span<const Tensor> params, std::span<const Tensor> grads,
                                     AdamState& state) {
    if (params.size() != grads.size()) {
        throw ValueError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    }
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw ValueError("adam_step: state/parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].defined()) throw ValueError("adam_step: missing gradient for parameter " + std::to_string(i));
        if (grads[i].shape() != params[i].shape() || state.m[i].size() != params[i].size()) {
            throw ShapeError("adam_step: gradient/moment shape mismatch for parameter " + std::to_string(i));
        }
    }

    const auto& h = state.hyper;
    state.t += 1;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));

    std::vector<Tensor> out;
    out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].values();
        auto g = grads[i].values();
        auto& m = state.m[i];
        auto& v = state.v[i];
        std::vector<double> next(p.begin(), p.end());
        for (std::size_t j = 0; j < next.size(); ++j) {
            m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
            v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            next[j] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
        }
        out.push_back(Tensor::parameter(params[i].shape(), std::move(next)));
    }
    return out;
}

inline std::vector<Tensor> adam_step(std::span<const Tensor> params, const GradientMap& grads, AdamState& state) {
    std::vector<Tensor> g;
    g.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads.contains(params[i])) {
            throw ValueError("adam_step: missing gradient for parameter " + std::to_string(i));
        }
        g.push_back(grads.get(params[i]));
    }
    return adam_step(params, std::span<const Tensor>(g), state);
}

}  // namespace otvq
