#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "otvq/diffcore.hpp"

namespace otvq::models {

/// Affine layer y = x W + b with W stored in x out.
struct Dense {
    Tensor w;
    Tensor b;

    std::size_t in() const { return w.extent(0); }
    std::size_t out() const { return w.extent(1); }
    Tensor forward(const Tensor& x) const { return add(matmul(x, w), b); }
};

namespace detail {

// Weights and biases uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Dense init_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    const double r = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-r, r);
    std::vector<double> w(in * out), b(out);
    for (auto& v : w) v = u(rng);
    for (auto& v : b) v = u(rng);
    return Dense{Tensor::parameter(Shape{in, out}, std::move(w)), Tensor::parameter(Shape{out}, std::move(b))};
}

inline Tensor mlp_forward(const std::vector<Dense>& layers, Tensor h) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        h = layers[l].forward(h);
        if (l + 1 < layers.size()) h = relu(h);
    }
    return h;
}

}  // namespace detail

/// MLP encoder R^{n_x} -> R^{M n_z} and mirrored decoder, relu between
/// layers and linear outputs. `hidden` lists the encoder's hidden widths; the
/// decoder uses them in reverse.
struct EncoderDecoder {
    std::size_t n_x = 0;
    std::size_t M = 0;
    std::size_t n_z = 0;
    std::vector<std::size_t> hidden;
    std::vector<Dense> encoder;
    std::vector<Dense> decoder;

    static EncoderDecoder init(std::size_t n_x, std::size_t m, std::size_t n_z, std::vector<std::size_t> hidden,
                               std::uint64_t seed) {
        EncoderDecoder net = skeleton(n_x, m, n_z, std::move(hidden));
        std::mt19937_64 rng(seed);
        const auto widths = net.encoder_widths();
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) net.encoder.push_back(detail::init_dense(widths[l], widths[l + 1], rng));
        for (std::size_t l = widths.size() - 1; l > 0; --l) net.decoder.push_back(detail::init_dense(widths[l], widths[l - 1], rng));
        return net;
    }

    // All weights and biases zero.
    static EncoderDecoder zeros(std::size_t n_x, std::size_t m, std::size_t n_z, std::vector<std::size_t> hidden) {
        EncoderDecoder net = skeleton(n_x, m, n_z, std::move(hidden));
        auto layer = [](std::size_t in, std::size_t out) {
            return Dense{Tensor::zeros(Shape{in, out}, true), Tensor::zeros(Shape{out}, true)};
        };
        const auto widths = net.encoder_widths();
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) net.encoder.push_back(layer(widths[l], widths[l + 1]));
        for (std::size_t l = widths.size() - 1; l > 0; --l) net.decoder.push_back(layer(widths[l], widths[l - 1]));
        return net;
    }

    // n_x, hidden..., M * n_z
    std::vector<std::size_t> encoder_widths() const {
        std::vector<std::size_t> w{n_x};
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(M * n_z);
        return w;
    }

    // x: B x n_x -> z: B x M x n_z
    Tensor encode(const Tensor& x) const {
        if (x.rank() != 2 || x.extent(1) != n_x) {
            throw ShapeError("encode: expected B x " + std::to_string(n_x) + ", got " + shape_string(x.shape()));
        }
        return reshape(detail::mlp_forward(encoder, x), Shape{x.extent(0), M, n_z});
    }

    // z: B x M x n_z -> x_hat: B x n_x
    Tensor decode(const Tensor& z) const {
        if (z.rank() != 3 || z.extent(1) != M || z.extent(2) != n_z) {
            throw ShapeError("decode: expected B x " + std::to_string(M) + " x " + std::to_string(n_z) + ", got " +
                             shape_string(z.shape()));
        }
        return detail::mlp_forward(decoder, reshape(z, Shape{z.extent(0), M * n_z}));
    }

    // Encoder layers then decoder layers, (w, b) per layer.
    std::vector<Tensor> parameters() const {
        std::vector<Tensor> p;
        for (const auto* stack : {&encoder, &decoder}) {
            for (const auto& l : *stack) {
                p.push_back(l.w);
                p.push_back(l.b);
            }
        }
        return p;
    }

    // Inverse of parameters(); consumes 2 * layers tensors starting at `from`.
    void set_parameters(const std::vector<Tensor>& p, std::size_t from = 0) {
        if (p.size() < from + 2 * (encoder.size() + decoder.size())) {
            throw ValueError("EncoderDecoder: too few parameter tensors");
        }
        for (auto* stack : {&encoder, &decoder}) {
            for (auto& l : *stack) {
                if (p[from].shape() != l.w.shape() || p[from + 1].shape() != l.b.shape()) {
                    throw ShapeError("EncoderDecoder: parameter shape mismatch");
                }
                l.w = p[from++];
                l.b = p[from++];
            }
        }
    }

    // Same weights as constants, for gradient-free evaluation.
    EncoderDecoder frozen() const {
        EncoderDecoder c = *this;
        for (auto* stack : {&c.encoder, &c.decoder}) {
            for (auto& l : *stack) {
                l.w = detach(l.w);
                l.b = detach(l.b);
            }
        }
        return c;
    }

private:
    static EncoderDecoder skeleton(std::size_t n_x, std::size_t m, std::size_t n_z, std::vector<std::size_t> hidden) {
        if (n_x == 0 || m == 0 || n_z == 0) throw ValueError("EncoderDecoder: n_x, M and n_z must be positive");
        for (std::size_t h : hidden) {
            if (h == 0) throw ValueError("EncoderDecoder: hidden widths must be positive");
        }
        EncoderDecoder net;
        net.n_x = n_x;
        net.M = m;
        net.n_z = n_z;
        net.hidden = std::move(hidden);
        return net;
    }
};

}  // namespace otvq::models
