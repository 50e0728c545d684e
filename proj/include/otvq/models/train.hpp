#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "otvq/data/dataset.hpp"
#include "otvq/diffcore.hpp"
#include "otvq/models/losses.hpp"
#include "otvq/models/network.hpp"
#include "otvq/ot/semi_dual.hpp"
#include "otvq/vq/codebook.hpp"
#include "otvq/vq/metrics.hpp"
#include "otvq/vq/quantize.hpp"

namespace otvq::models {

enum class Method { VqVae, VqWae };

inline const char* method_name(Method m) { return m == Method::VqVae ? "vqvae" : "vqwae"; }

inline Method parse_method(const std::string& s) {
    if (s == "vqvae") return Method::VqVae;
    if (s == "vqwae") return Method::VqWae;
    throw ConfigError("unknown method '" + s + "' (expected vqvae or vqwae)");
}

/// Everything that shapes the model and its optimization.
struct ModelConfig {
    Method method = Method::VqWae;
    std::size_t n_x = 2;
    std::size_t K = 16;
    std::size_t M = 1;
    std::size_t n_z = 8;
    std::vector<std::size_t> hidden{128, 128};
    std::size_t batch_size = 32;
    double lr = 1e-4;
    double phi_lr = 0.05;
    std::size_t phi_iters = 5;
    ObjectiveWeights weights;
    std::uint64_t seed = 0;
};

// splitmix64 finalizer, to give each random stream of a run its own seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t { kNetworkSeed = 0, kCodebookSeed = 1, kBatchSeed = 2 };

/// Complete state of a training run. `sampler_state` carries the mini-batch
/// stream position so that a restored run continues on the same batches.
struct TrainState {
    ModelConfig config;
    EncoderDecoder net;
    vq::Codebook codebook;
    ot::DualPotentials phis;
    AdamState min_adam;           // encoder, decoder, atoms (and beta for vqwae)
    ot::DualAscentState phi_adam;  // one Adam state per component
    std::uint64_t iteration = 0;
    std::string sampler_state;
};

inline TrainState init_state(const ModelConfig& cfg) {
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
    TrainState s;
    s.config = cfg;
    s.net = EncoderDecoder::init(cfg.n_x, cfg.M, cfg.n_z, cfg.hidden, derive_seed(cfg.seed, kNetworkSeed));
    s.codebook = vq::Codebook::uniform_init(cfg.K, cfg.M, cfg.n_z, derive_seed(cfg.seed, kCodebookSeed));
    s.phis = ot::DualPotentials::zeros(cfg.M, cfg.K);
    s.min_adam = AdamState(AdamHyper{.lr = cfg.lr});
    return s;
}

// Parameters of the minimization group, in Adam slot order.
inline std::vector<Tensor> min_group(const TrainState& s) {
    auto p = s.net.parameters();
    p.push_back(s.codebook.atoms);
    if (s.config.method == Method::VqWae) p.push_back(s.codebook.beta);
    return p;
}

inline void set_min_group(TrainState& s, const std::vector<Tensor>& p) {
    s.net.set_parameters(p);
    const std::size_t base = s.net.parameters().size();
    s.codebook.atoms = p.at(base);
    if (s.config.method == Method::VqWae) s.codebook.beta = p.at(base + 1);
}

/// One iteration on a B x n_x batch. VQ-WAE first runs phi_iters ascent steps
/// on the potentials (latents held fixed), then both methods take one Adam
/// step on their objective. Returns the objective as evaluated for that step;
/// `indices` optionally receives the batch's B x M codeword assignments.
inline LossBreakdown train_step(TrainState& s, const Tensor& batch, std::vector<std::size_t>* indices = nullptr) {
    const auto& cfg = s.config;
    const Tensor z = s.net.encode(batch);
    LossEval e;
    if (cfg.method == Method::VqWae) {
        s.phis = ot::dual_ascent(z, s.codebook.atoms, vq::pi_from_beta(s.codebook), s.phis, cfg.phi_iters, cfg.phi_lr,
                                 cfg.weights.eps, &s.phi_adam);
        e = vqwae_loss_from_latents(s.net, s.codebook, s.phis, batch, z, cfg.weights);
    } else {
        e = vqvae_loss_from_latents(s.net, s.codebook, batch, z, cfg.weights);
    }
    if (!std::isfinite(e.parts.total)) {
        throw NumericError("iteration " + std::to_string(s.iteration) + ": non-finite loss");
    }
    const auto params = min_group(s);
    s.min_adam.hyper.lr = cfg.lr;
    set_min_group(s, adam_step(params, backward(e.total), s.min_adam));
    ++s.iteration;
    if (indices) *indices = std::move(e.quantized.indices);
    return e.parts;
}

struct EvalMetrics {
    double mse = 0.0;
    double psnr = 0.0;  // +inf when mse == 0
    std::vector<double> perplexities;
    vq::UsageStats usage;
};

inline double psnr(double mse, double peak) {
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

/// Reconstruction error and codeword usage over the whole dataset, without
/// building a gradient graph.
inline EvalMetrics evaluate(const TrainState& s, const data::Dataset& d, std::size_t chunk = 512) {
    if (d.size() == 0) throw ValueError("evaluate: empty dataset");
    if (d.n_x != s.config.n_x) throw ShapeError("evaluate: dataset n_x differs from the model");
    const EncoderDecoder net = s.net.frozen();
    vq::Codebook cb = s.codebook;
    cb.atoms = detach(cb.atoms);
    cb.beta = detach(cb.beta);

    EvalMetrics out;
    out.usage = vq::UsageStats(cb.M, cb.K);
    double sse = 0.0;
    for (std::size_t start = 0; start < d.size(); start += chunk) {
        const std::size_t rows = std::min(chunk, d.size() - start);
        const Tensor x = Tensor::constant(
            Shape{rows, d.n_x},
            std::vector<double>(d.samples.begin() + static_cast<std::ptrdiff_t>(start * d.n_x),
                                d.samples.begin() + static_cast<std::ptrdiff_t>((start + rows) * d.n_x)));
        const auto q = vq::quantize(net.encode(x), cb);
        const Tensor x_hat = net.decode(q.quantized);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double diff = x_hat[i] - x[i];
            sse += diff * diff;
        }
        out.usage.add(q.indices);
    }
    out.mse = sse / static_cast<double>(d.samples.size());
    out.psnr = psnr(out.mse, d.peak);
    out.perplexities = out.usage.perplexities();
    return out;
}

}  // namespace otvq::models
