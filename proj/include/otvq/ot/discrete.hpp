#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "otvq/errors.hpp"
#include "otvq/matrix.hpp"

namespace otvq::ot {

inline constexpr double kSimplexTolerance = 1e-12;

/// Finite probability measure: n atoms in R^dim with nonnegative weights
/// summing to one.
struct DiscreteDist {
    std::vector<double> weights;
    std::size_t support_dim = 0;
    std::vector<double> atoms;  // n x support_dim, row-major

    std::size_t size() const { return weights.size(); }
    std::span<const double> atom(std::size_t i) const { return {atoms.data() + i * support_dim, support_dim}; }

    void validate() const {
        if (weights.empty()) throw ValueError("DiscreteDist: no atoms");
        if (atoms.size() != weights.size() * support_dim) throw ShapeError("DiscreteDist: atom array size mismatch");
        double s = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw ValueError("DiscreteDist: negative or NaN weight");
            s += w;
        }
        if (std::abs(s - 1.0) > kSimplexTolerance) {
            throw ValueError("DiscreteDist: weights sum to " + std::to_string(s) + ", not 1");
        }
    }

    static DiscreteDist uniform(std::size_t support_dim, std::vector<double> atoms) {
        DiscreteDist d;
        d.support_dim = support_dim;
        const std::size_t n = support_dim ? atoms.size() / support_dim : 0;
        d.weights.assign(n, 1.0 / static_cast<double>(n));
        d.atoms = std::move(atoms);
        d.validate();
        return d;
    }
};

// Ground cost between two atoms; squared Euclidean unless configured otherwise.
using GroundCost = std::function<double(std::span<const double>, std::span<const double>)>;

inline double squared_euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline Matrix cost_matrix(const DiscreteDist& mu, const DiscreteDist& nu, const GroundCost& cost = squared_euclidean) {
    if (mu.support_dim != nu.support_dim) throw ShapeError("cost_matrix: support dimensions differ");
    Matrix c(mu.size(), nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j) c(i, j) = cost(mu.atom(i), nu.atom(j));
    return c;
}

/// Coupling between two finite distributions together with its cost.
struct TransportPlan {
    Matrix matrix;
    double value = 0.0;
    std::vector<double> row_marginal;
    std::vector<double> col_marginal;
};

inline TransportPlan finalize_plan(Matrix m, const Matrix& cost) {
    TransportPlan p;
    p.row_marginal.assign(m.rows, 0.0);
    p.col_marginal.assign(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            p.row_marginal[i] += m(i, j);
            p.col_marginal[j] += m(i, j);
            p.value += m(i, j) * cost(i, j);
        }
    }
    p.matrix = std::move(m);
    return p;
}

// Largest absolute deviation of the plan's marginals from (mu, nu).
inline double marginal_violation(const TransportPlan& plan, std::span<const double> mu, std::span<const double> nu) {
    double worst = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) worst = std::max(worst, std::abs(plan.row_marginal[i] - mu[i]));
    for (std::size_t j = 0; j < nu.size(); ++j) worst = std::max(worst, std::abs(plan.col_marginal[j] - nu[j]));
    return worst;
}

}  // namespace otvq::ot
