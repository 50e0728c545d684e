#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "otvq/diffcore.hpp"
#include "otvq/vq/codebook.hpp"

namespace otvq::vq {

struct QuantizeResult {
    std::vector<std::size_t> indices;  // B x M, row-major
    Tensor quantized;                  // B x M x n_z, gathered atoms (differentiable w.r.t. atoms)
    Tensor st_output;                  // B x M x n_z, decoder input for the copy-gradient trick
    std::size_t B = 0;
    std::size_t M = 0;

    std::size_t index(std::size_t b, std::size_t m) const { return indices[b * M + m]; }
};

/// Forward value of `quantized`, backward identity into `z`: the
/// straight-through output z + detach(quantized - z), except that the
/// forward values are exactly the quantized values rather than a rounded sum.
inline Tensor straight_through(const Tensor& z, const Tensor& quantized) {
    if (z.shape() != quantized.shape()) throw ShapeError("straight_through: shape mismatch");
    std::vector<double> v(quantized.values().begin(), quantized.values().end());
    return Tensor::from_op("straight_through", z.shape(), std::move(v), {z},
                           [](std::span<const double> g, std::vector<std::vector<double>>& gi) {
                               for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                           });
}

// Lowest index among the squared-Euclidean nearest atoms.
inline std::size_t nearest_atom(std::span<const double> point, std::span<const double> atoms, std::size_t n_z) {
    const std::size_t k = atoms.size() / n_z;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
        double d = 0.0;
        for (std::size_t p = 0; p < n_z; ++p) {
            const double diff = point[p] - atoms[j * n_z + p];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

/// Per-component nearest-codeword quantization of z (B x M x n_z).
inline QuantizeResult quantize(const Tensor& z, const Codebook& codebook) {
    if (codebook.K == 0 || !codebook.atoms.defined()) throw ValueError("quantize: empty codebook");
    if (z.rank() != 3 || z.extent(2) != codebook.n_z) {
        throw ShapeError("quantize: expected B x M x " + std::to_string(codebook.n_z) + ", got " +
                         shape_string(z.shape()));
    }
    QuantizeResult r;
    r.B = z.extent(0);
    r.M = z.extent(1);
    const std::size_t n_z = codebook.n_z;
    auto zv = z.values();
    auto av = codebook.atoms.values();
    r.indices.resize(r.B * r.M);
    for (std::size_t row = 0; row < r.B * r.M; ++row) {
        r.indices[row] = nearest_atom(zv.subspan(row * n_z, n_z), av, n_z);
    }
    r.quantized = reshape(index_select(codebook.atoms, r.indices), z.shape());
    r.st_output = straight_through(z, r.quantized);
    return r;
}

/// VQ-VAE regularizers with d_z the mean over B x M positions of squared
/// distances:
///   codebook   = d_z(detach(z), quantized)   (moves atoms only)
///   commitment = d_z(z, detach(quantized))   (moves the encoder only)
inline std::pair<Tensor, Tensor> vqvae_codebook_terms(const Tensor& z, const Tensor& quantized) {
    if (z.shape() != quantized.shape() || z.rank() != 3) throw ShapeError("vqvae_codebook_terms: shape mismatch");
    const double positions = static_cast<double>(z.extent(0) * z.extent(1));
    Tensor codebook = scale(sum(square(sub(detach(z), quantized))), 1.0 / positions);
    Tensor commitment = scale(sum(square(sub(z, detach(quantized)))), 1.0 / positions);
    return {codebook, commitment};
}

}  // namespace otvq::vq
