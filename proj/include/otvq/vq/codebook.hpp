#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "otvq/diffcore.hpp"

namespace otvq::vq {

/// K learnable codewords in R^{n_z} shared by M latent components, plus one
/// logit vector per component defining the codeword weights pi^m = softmax(beta^m).
struct Codebook {
    Tensor atoms;  // K x n_z
    Tensor beta;   // M x K
    std::size_t K = 0;
    std::size_t M = 0;
    std::size_t n_z = 0;

    // Atoms i.i.d. uniform on [-1/K, 1/K]; beta zero so pi starts uniform.
    static Codebook uniform_init(std::size_t k, std::size_t m, std::size_t n_z, std::uint64_t seed) {
        if (k == 0 || m == 0 || n_z == 0) throw ValueError("Codebook: K, M and n_z must be positive");
        std::mt19937_64 rng(seed);
        const double r = 1.0 / static_cast<double>(k);
        std::uniform_real_distribution<double> u(-r, r);
        std::vector<double> a(k * n_z);
        for (auto& x : a) x = u(rng);
        return from_values(k, m, n_z, std::move(a), std::vector<double>(m * k, 0.0));
    }

    // Atoms copied from K latent vectors drawn without replacement from
    // `latents` (rows x n_z); falls back to sampling with replacement when
    // there are fewer rows than codewords.
    static Codebook sample_init(std::size_t k, std::size_t m, std::size_t n_z, std::span<const double> latents,
                                std::uint64_t seed) {
        if (k == 0 || m == 0 || n_z == 0) throw ValueError("Codebook: K, M and n_z must be positive");
        const std::size_t rows = latents.size() / n_z;
        if (rows == 0) throw ValueError("Codebook: no latents to sample from");
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> order(rows);
        for (std::size_t i = 0; i < rows; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<double> a(k * n_z);
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t src = j < rows ? order[j] : std::uniform_int_distribution<std::size_t>(0, rows - 1)(rng);
            std::copy_n(latents.begin() + static_cast<std::ptrdiff_t>(src * n_z), n_z, a.begin() + static_cast<std::ptrdiff_t>(j * n_z));
        }
        return from_values(k, m, n_z, std::move(a), std::vector<double>(m * k, 0.0));
    }

    static Codebook from_values(std::size_t k, std::size_t m, std::size_t n_z, std::vector<double> atoms,
                                std::vector<double> beta) {
        Codebook c;
        c.K = k;
        c.M = m;
        c.n_z = n_z;
        c.atoms = Tensor::parameter(Shape{k, n_z}, std::move(atoms));
        c.beta = Tensor::parameter(Shape{m, k}, std::move(beta));
        return c;
    }
};

// Rowwise softmax of the logits: M probability vectors (M x K).
inline Tensor pi_from_beta(const Codebook& codebook) { return softmax_last(codebook.beta); }

/// KL(pi || uniform_K) = ln K + sum_k pi_k ln pi_k, with 0 ln 0 = 0. For an
/// M x K input the M divergences are summed.
inline Tensor kl_to_uniform(const Tensor& pi) {
    if (pi.rank() != 1 && pi.rank() != 2) throw ShapeError("kl_to_uniform: expected K or M x K weights");
    const std::size_t k = pi.shape().back();
    const std::size_t rows = pi.size() / k;
    return add(sum(xlogx(pi)), Tensor::scalar(static_cast<double>(rows) * std::log(static_cast<double>(k))));
}

inline double kl_to_uniform(std::span<const double> pi) {
    double s = std::log(static_cast<double>(pi.size()));
    for (double p : pi) {
        if (p < 0.0) throw ValueError("kl_to_uniform: negative weight");
        if (p > 0.0) s += p * std::log(p);
    }
    return s;
}

}  // namespace otvq::vq
