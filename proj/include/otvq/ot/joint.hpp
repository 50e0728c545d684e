#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "otvq/ot/discrete.hpp"

namespace otvq::ot {

namespace detail {

inline void check_plans(std::span<const TransportPlan> plans, std::span<const Matrix> costs) {
    if (plans.empty()) throw ValueError("joint coupling: no components");
    if (plans.size() != costs.size()) throw ShapeError("joint coupling: plan/cost count mismatch");
    const auto& mu = plans[0].row_marginal;
    for (std::size_t m = 0; m < plans.size(); ++m) {
        const auto& p = plans[m];
        if (p.matrix.rows != mu.size() || costs[m].rows != p.matrix.rows || costs[m].cols != p.matrix.cols) {
            throw ShapeError("joint coupling: component " + std::to_string(m) + " has inconsistent extents");
        }
        for (double x : p.matrix.data) {
            if (x < -1e-12) throw ValueError("joint coupling: negative plan entry in component " + std::to_string(m));
        }
        for (std::size_t i = 0; i < mu.size(); ++i) {
            if (std::abs(p.row_marginal[i] - mu[i]) > 1e-9) {
                throw ValueError("joint coupling: components disagree on the source marginal");
            }
        }
    }
}

inline std::size_t joint_atom_count(std::span<const TransportPlan> plans) {
    std::size_t total = 1;
    for (const auto& p : plans) total *= p.matrix.cols;
    return total;
}

// Mixed-radix decoding of a joint atom index into per-component indices
// (component 0 varies slowest).
inline void decode_joint(std::size_t flat, std::span<const TransportPlan> plans, std::vector<std::size_t>& out) {
    out.resize(plans.size());
    for (std::size_t m = plans.size(); m-- > 0;) {
        out[m] = flat % plans[m].matrix.cols;
        flat /= plans[m].matrix.cols;
    }
}

}  // namespace detail

/// The coupling that, conditionally on each source point, picks the M target
/// atoms independently according to the per-component plans:
///
///   G(n, (k_1..k_M)) = mu_n * prod_m P_m(n, k_m) / mu_n
///
/// Returned as an N x (K_1 * ... * K_M) matrix.
inline Matrix independent_coupling(std::span<const TransportPlan> plans) {
    if (plans.empty()) throw ValueError("independent_coupling: no components");
    const std::size_t n = plans[0].matrix.rows;
    const std::size_t cols = detail::joint_atom_count(plans);
    Matrix g(n, cols);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = plans[0].row_marginal[i];
        if (mu <= 0.0) continue;
        for (std::size_t c = 0; c < cols; ++c) {
            detail::decode_joint(c, plans, idx);
            double v = mu;
            for (std::size_t m = 0; m < plans.size(); ++m) v *= plans[m].matrix(i, idx[m]) / mu;
            g(i, c) = v;
        }
    }
    return g;
}

// Joint ground cost on product atoms: the mean of the per-component costs.
inline Matrix joint_cost_matrix(std::span<const Matrix> costs, std::span<const TransportPlan> plans) {
    if (costs.empty()) throw ValueError("joint_cost_matrix: no components");
    const std::size_t n = costs[0].rows;
    const std::size_t cols = detail::joint_atom_count(plans);
    Matrix c(n, cols);
    std::vector<std::size_t> idx;
    const double inv_m = 1.0 / static_cast<double>(costs.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t col = 0; col < cols; ++col) {
            detail::decode_joint(col, plans, idx);
            double s = 0.0;
            for (std::size_t m = 0; m < costs.size(); ++m) s += costs[m](i, idx[m]);
            c(i, col) = s * inv_m;
        }
    }
    return c;
}

inline constexpr std::size_t kJointCheckMaxEntries = 1u << 20;

/// Cost of the independent joint coupling under the averaged joint cost.
/// This equals (1/M) sum_m <P_m, C_m>; when the product table is small enough
/// the joint coupling is built explicitly and the two routes are compared.
inline double independent_joint_cost(std::span<const TransportPlan> plans, std::span<const Matrix> costs) {
    detail::check_plans(plans, costs);
    double avg = 0.0;
    for (std::size_t m = 0; m < plans.size(); ++m) {
        double v = 0.0;
        for (std::size_t t = 0; t < plans[m].matrix.data.size(); ++t) v += plans[m].matrix.data[t] * costs[m].data[t];
        avg += v;
    }
    avg /= static_cast<double>(plans.size());

    const std::size_t entries = plans[0].matrix.rows * detail::joint_atom_count(plans);
    if (entries <= kJointCheckMaxEntries) {
        const Matrix g = independent_coupling(plans);
        const Matrix c = joint_cost_matrix(costs, plans);
        double joint = 0.0;
        for (std::size_t t = 0; t < g.data.size(); ++t) joint += g.data[t] * c.data[t];
        if (std::abs(joint - avg) > 1e-9 * std::max(1.0, std::abs(avg))) {
            throw NumericError("independent_joint_cost: product coupling cost " + std::to_string(joint) +
                               " differs from component average " + std::to_string(avg));
        }
    }
    return avg;
}

}  // namespace otvq::ot
