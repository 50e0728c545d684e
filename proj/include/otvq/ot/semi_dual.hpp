#pragma once

#include <functional>
#include <vector>

#include "otvq/diffcore.hpp"

namespace otvq::ot {

// Differentiable latent ground cost: (B x d, K x d) -> B x K.
using LatentCost = std::function<Tensor(const Tensor&, const Tensor&)>;

inline Tensor squared_euclidean_cost(const Tensor& a, const Tensor& b) { return pairwise_sqdist(a, b); }

/// Kantorovich potentials on the K codeword atoms, one K-vector per latent
/// component. Only the atom values matter to the semi-dual, so no richer
/// function class is kept.
struct DualPotentials {
    std::vector<std::vector<double>> phi;

    static DualPotentials zeros(std::size_t components, std::size_t atoms) {
        return DualPotentials{std::vector<std::vector<double>>(components, std::vector<double>(atoms, 0.0))};
    }
    std::size_t components() const { return phi.size(); }

    bool operator==(const DualPotentials&) const = default;
};

/// Entropic semi-dual objective for a fixed cost matrix C (B x K), target
/// weights pi (K) and potential phi (K):
///
///   (1/B) sum_i [ -eps log sum_k pi_k exp((phi_k - C_ik) / eps) ] + sum_k pi_k phi_k
///
/// The source measure is uniform over the B rows. Maximizing over phi gives
/// the entropic OT value with the KL-to-product regularizer.
inline Tensor semi_dual_from_cost(const Tensor& cost, const Tensor& pi, const Tensor& phi, double eps) {
    if (!(eps > 0.0)) throw ValueError("semi_dual_value: eps must be positive");
    if (cost.rank() != 2 || pi.rank() != 1 || phi.rank() != 1 || pi.extent(0) != cost.extent(1) ||
        phi.extent(0) != cost.extent(1)) {
        throw ShapeError("semi_dual_value: cost " + shape_string(cost.shape()) + ", pi " + shape_string(pi.shape()) +
                         ", phi " + shape_string(phi.shape()));
    }
    const Tensor scores = add(scale(sub(cost, phi), -1.0 / eps), log(pi));  // B x K
    const Tensor soft_min = scale(mean(logsumexp_last(scores)), -eps);
    return add(soft_min, sum(mul(pi, phi)));
}

inline Tensor semi_dual_value(const Tensor& z_batch, const Tensor& codebook_atoms, const Tensor& pi, const Tensor& phi,
                              double eps, const LatentCost& cost = squared_euclidean_cost) {
    return semi_dual_from_cost(cost(z_batch, codebook_atoms), pi, phi, eps);
}

// Rows of component m from a B x M x d latent tensor, as a B x d tensor.
inline Tensor component_rows(const Tensor& z, std::size_t m) {
    if (z.rank() != 3) throw ShapeError("component_rows: expected B x M x d, got " + shape_string(z.shape()));
    const std::size_t b = z.extent(0), comps = z.extent(1), d = z.extent(2);
    if (m >= comps) throw ShapeError("component_rows: component out of range");
    std::vector<std::size_t> rows(b);
    for (std::size_t i = 0; i < b; ++i) rows[i] = i * comps + m;
    return index_select(reshape(z, Shape{b * comps, d}), rows);
}

// Per-component Adam moments carried across calls to dual_ascent.
struct DualAscentState {
    std::vector<AdamState> adam;
};

/// Gradient ascent (Adam) on the semi-dual, independently for each of the M
/// components. Latents, atoms and weights enter as constants, so nothing but
/// phi is touched. z is B x M x d, atoms K x d, pis M x K.
inline DualPotentials dual_ascent(const Tensor& z, const Tensor& atoms, const Tensor& pis, const DualPotentials& phis,
                                  std::size_t steps, double lr, double eps, DualAscentState* state = nullptr,
                                  const LatentCost& cost = squared_euclidean_cost) {
    if (z.rank() != 3 || pis.rank() != 2) throw ShapeError("dual_ascent: expected z B x M x d and pis M x K");
    const std::size_t comps = z.extent(1), k = atoms.extent(0);
    if (pis.extent(0) != comps || pis.extent(1) != k || phis.components() != comps) {
        throw ShapeError("dual_ascent: component/atom counts disagree");
    }
    DualAscentState local;
    DualAscentState& st = state ? *state : local;
    if (st.adam.empty()) st.adam.assign(comps, AdamState(AdamHyper{.lr = lr}));
    if (st.adam.size() != comps) throw ShapeError("dual_ascent: state has wrong component count");

    DualPotentials out = phis;
    if (steps == 0) return out;
    const Tensor atoms_c = detach(atoms);
    for (std::size_t m = 0; m < comps; ++m) {
        if (out.phi[m].size() != k) throw ShapeError("dual_ascent: potential length differs from K");
        const Tensor c = cost(detach(component_rows(z, m)), atoms_c);
        const Tensor pi = Tensor::constant(Shape{k}, {pis.values().begin() + m * k, pis.values().begin() + (m + 1) * k});
        std::vector<Tensor> phi{Tensor::parameter(Shape{k}, out.phi[m])};
        st.adam[m].hyper.lr = lr;
        for (std::size_t s = 0; s < steps; ++s) {
            const Tensor objective = scale(semi_dual_from_cost(c, pi, phi[0], eps), -1.0);
            const GradientMap g = backward(objective);
            phi = adam_step(phi, g, st.adam[m]);
        }
        out.phi[m].assign(phi[0].values().begin(), phi[0].values().end());
    }
    return out;
}

}  // namespace otvq::ot
