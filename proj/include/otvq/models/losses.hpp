#pragma once

#include <vector>

#include "otvq/diffcore.hpp"
#include "otvq/models/network.hpp"
#include "otvq/ot/semi_dual.hpp"
#include "otvq/vq/codebook.hpp"
#include "otvq/vq/quantize.hpp"

namespace otvq::models {

/// Scalar parts of one objective evaluation; parts the active method does not
/// use stay zero.
///   vqvae: total = recon + vqvae_codebook + beta * vqvae_commit
///   vqwae: total = recon + lambda * ws_term + lambda_r * kl_term
struct LossBreakdown {
    double total = 0.0;
    double recon = 0.0;
    double ws_term = 0.0;
    double kl_term = 0.0;
    double vqvae_codebook = 0.0;
    double vqvae_commit = 0.0;

    bool operator==(const LossBreakdown&) const = default;
};

struct ObjectiveWeights {
    double beta = 0.25;     // VQ-VAE commitment weight
    double lambda = 1e-3;   // VQ-WAE Wasserstein weight
    double lambda_r = 1.0;  // VQ-WAE KL-to-uniform weight
    double eps = 0.1;       // entropic regularization of the WS term
};

/// Differentiable total plus its parts and the codeword assignments.
struct LossEval {
    Tensor total;
    LossBreakdown parts;
    vq::QuantizeResult quantized;
};

// Mean squared error over every element.
inline Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

inline LossEval vqvae_loss_from_latents(const EncoderDecoder& net, const vq::Codebook& cb, const Tensor& x,
                                        const Tensor& z, const ObjectiveWeights& w) {
    LossEval e;
    e.quantized = vq::quantize(z, cb);
    const Tensor recon = mse(net.decode(e.quantized.st_output), x);
    const auto [codebook, commit] = vq::vqvae_codebook_terms(z, e.quantized.quantized);
    e.total = add(add(recon, codebook), scale(commit, w.beta));
    e.parts.total = e.total.item();
    e.parts.recon = recon.item();
    e.parts.vqvae_codebook = codebook.item();
    e.parts.vqvae_commit = commit.item();
    return e;
}

inline LossEval vqvae_loss(const EncoderDecoder& net, const vq::Codebook& cb, const Tensor& x,
                           const ObjectiveWeights& w = {}) {
    return vqvae_loss_from_latents(net, cb, x, net.encode(x), w);
}

// Row m of an M x K weight matrix as a differentiable K-vector.
inline Tensor weight_row(const Tensor& pis, std::size_t m) {
    const std::size_t row[] = {m};
    return reshape(index_select(pis, row), Shape{pis.extent(1)});
}

/// (1/M) sum_m semi_dual(z^m, atoms, pi^m, phi^m) with the potentials as constants.
inline Tensor ws_term(const Tensor& z, const vq::Codebook& cb, const Tensor& pis, const ot::DualPotentials& phis,
                      double eps) {
    if (phis.components() != cb.M) throw ShapeError("ws_term: potential count differs from M");
    Tensor acc;
    for (std::size_t m = 0; m < cb.M; ++m) {
        if (phis.phi[m].size() != cb.K) throw ShapeError("ws_term: potential length differs from K");
        const Tensor phi = Tensor::constant(Shape{cb.K}, phis.phi[m]);
        const Tensor v = ot::semi_dual_value(ot::component_rows(z, m), cb.atoms, weight_row(pis, m), phi, eps);
        acc = acc.defined() ? add(acc, v) : v;
    }
    return scale(acc, 1.0 / static_cast<double>(cb.M));
}

inline LossEval vqwae_loss_from_latents(const EncoderDecoder& net, const vq::Codebook& cb,
                                        const ot::DualPotentials& phis, const Tensor& x, const Tensor& z,
                                        const ObjectiveWeights& w) {
    LossEval e;
    e.quantized = vq::quantize(z, cb);
    const Tensor recon = mse(net.decode(e.quantized.st_output), x);
    const Tensor pis = vq::pi_from_beta(cb);
    const Tensor ws = ws_term(z, cb, pis, phis, w.eps);
    const Tensor kl = vq::kl_to_uniform(pis);
    e.total = add(add(recon, scale(ws, w.lambda)), scale(kl, w.lambda_r));
    e.parts.total = e.total.item();
    e.parts.recon = recon.item();
    e.parts.ws_term = ws.item();
    e.parts.kl_term = kl.item();
    return e;
}

inline LossEval vqwae_loss(const EncoderDecoder& net, const vq::Codebook& cb, const ot::DualPotentials& phis,
                           const Tensor& x, const ObjectiveWeights& w = {}) {
    return vqwae_loss_from_latents(net, cb, phis, x, net.encode(x), w);
}

}  // namespace otvq::models
