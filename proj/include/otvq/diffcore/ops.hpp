#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "otvq/diffcore/tensor.hpp"

// Differentiable primitives. Every function returns a fresh tensor and, when
// any input requires a gradient, records the edge needed by backward().

namespace otvq {

namespace detail {

enum class Broadcast { Same, Row, Scalar };

// Binary elementwise ops accept b with a's shape, a rank-1 b matching a's last
// extent (broadcast across rows), or a single-element b.
inline Broadcast broadcast_rule(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::Same;
    if (b.size() == 1 && b.rank() <= 1) return Broadcast::Scalar;
    if (b.rank() == 1 && a.rank() >= 1 && a.shape().back() == b.extent(0)) return Broadcast::Row;
    throw ShapeError(std::string(op) + ": cannot combine " + shape_string(a.shape()) + " with " +
                     shape_string(b.shape()));
}

inline std::size_t bindex(Broadcast rule, std::size_t i, std::size_t bsize) {
    switch (rule) {
        case Broadcast::Same: return i;
        case Broadcast::Row: return i % bsize;
        case Broadcast::Scalar: return 0;
    }
    return 0;
}

template <class Fwd, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
    const Broadcast rule = broadcast_rule(op, a, b);
    const std::size_t n = a.size(), bn = b.size();
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[bindex(rule, i, bn)]);
    return Tensor::from_op(op, a.shape(), std::move(out), {a, b},
                           [a, b, rule, da, db](std::span<const double> g,
                                                std::vector<std::vector<double>>& gi) {
                               auto av = a.values();
                               auto bv = b.values();
                               const std::size_t bn = bv.size();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                   const std::size_t j = bindex(rule, i, bn);
                                   gi[0][i] += g[i] * da(av[i], bv[j]);
                                   gi[1][j] += g[i] * db(av[i], bv[j]);
                               }
                           });
}

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    return Tensor::from_op(op, a.shape(), std::move(out), {a},
                           [a, deriv](std::span<const double> g, std::vector<std::vector<double>>& gi) {
                               auto av = a.values();
                               for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * deriv(av[i]);
                           });
}

inline void require_rank(const char* op, const Tensor& t, std::size_t rank) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
    }
}

inline Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "subtract", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "multiply", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

// Multiplication by a non-differentiable constant.
inline Tensor scale(const Tensor& a, double c) {
    return detail::unary(
        "scale", a, [c](double x) { return c * x; }, [c](double) { return c; });
}

inline Tensor square(const Tensor& a) {
    return detail::unary(
        "square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

inline Tensor relu(const Tensor& a) {
    return detail::unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& a) {
    return detail::unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

inline Tensor log(const Tensor& a) {
    return detail::unary(
        "log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

// x ln x with the continuous extension 0 at x = 0 (derivative taken as 0 there).
inline Tensor xlogx(const Tensor& a) {
    for (double v : a.values()) {
        if (v < 0.0) throw NumericError("xlogx: negative input");
    }
    return detail::unary(
        "xlogx", a, [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; },
        [](double x) { return x > 0.0 ? std::log(x) + 1.0 : 0.0; });
}

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return Tensor::from_op("sum", Shape{}, {s}, {a},
                           [](std::span<const double> g, std::vector<std::vector<double>>& gi) {
                               for (double& x : gi[0]) x += g[0];
                           });
}

inline Tensor mean(const Tensor& a) {
    const double n = static_cast<double>(a.size());
    double s = 0.0;
    for (double v : a.values()) s += v;
    return Tensor::from_op("mean", Shape{}, {s / n}, {a},
                           [n](std::span<const double> g, std::vector<std::vector<double>>& gi) {
                               for (double& x : gi[0]) x += g[0] / n;
                           });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        throw ShapeError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
    }
    std::vector<double> v(a.values().begin(), a.values().end());
    return Tensor::from_op("reshape", std::move(shape), std::move(v), {a},
                           [](std::span<const double> g, std::vector<std::vector<double>>& gi) {
                               for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                           });
}

// Value copy with no graph edge: gradients never flow through the result.
inline Tensor detach(const Tensor& a) {
    return Tensor::constant(a.shape(), std::vector<double>(a.values().begin(), a.values().end()));
}

// (n x k) . (k x m)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_rank("matmul", a, 2);
    detail::require_rank("matmul", b, 2);
    const std::size_t n = a.extent(0), k = a.extent(1), m = b.extent(1);
    if (b.extent(0) != k) {
        throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = &bv[p * m];
            double* orow = &out[i * m];
            for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    return Tensor::from_op("matmul", Shape{n, m}, std::move(out), {a, b},
                           [a, b, n, k, m](std::span<const double> g, std::vector<std::vector<double>>& gi) {
                               auto av = a.values();
                               auto bv = b.values();
                               if (a.requires_grad()) {
                                   // dA = G . B^T
                                   for (std::size_t i = 0; i < n; ++i) {
                                       for (std::size_t p = 0; p < k; ++p) {
                                           double acc = 0.0;
                                           for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * bv[p * m + j];
                                           gi[0][i * k + p] += acc;
                                       }
                                   }
                               }
                               if (b.requires_grad()) {
                                   // dB = A^T . G
                                   for (std::size_t i = 0; i < n; ++i) {
                                       for (std::size_t p = 0; p < k; ++p) {
                                           const double aip = av[i * k + p];
                                           if (aip == 0.0) continue;
                                           for (std::size_t j = 0; j < m; ++j) gi[1][p * m + j] += aip * g[i * m + j];
                                       }
                                   }
                               }
                           });
}

inline Tensor softmax_last(const Tensor& a) {
    if (a.rank() == 0) throw ShapeError("softmax_last: scalar input");
    const std::size_t d = a.shape().back();
    const std::size_t rows = a.size() / d;
    auto av = a.values();
    std::vector<double> out(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = &av[r * d];
        const double mx = *std::max_element(x, x + d);
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (out[r * d + j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] /= s;
    }
    std::vector<double> probs = out;
    return Tensor::from_op("softmax_last", a.shape(), std::move(out), {a},
                           [probs = std::move(probs), d, rows](std::span<const double> g,
                                                               std::vector<std::vector<double>>& gi) {
                               for (std::size_t r = 0; r < rows; ++r) {
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * probs[r * d + j];
                                   for (std::size_t j = 0; j < d; ++j) {
                                       gi[0][r * d + j] += probs[r * d + j] * (g[r * d + j] - dot);
                                   }
                               }
                           });
}

// Reduces the last axis with max-subtraction stabilization.
inline Tensor logsumexp_last(const Tensor& a) {
    if (a.rank() == 0) throw ShapeError("logsumexp_last: scalar input");
    const std::size_t d = a.shape().back();
    const std::size_t rows = a.size() / d;
    auto av = a.values();
    std::vector<double> out(rows);
    std::vector<double> weights(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = &av[r * d];
        const double mx = *std::max_element(x, x + d);
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (weights[r * d + j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < d; ++j) weights[r * d + j] /= s;
        out[r] = mx + std::log(s);
    }
    return Tensor::from_op("logsumexp_last", detail::drop_last(a.shape()), std::move(out), {a},
                           [weights = std::move(weights), d, rows](std::span<const double> g,
                                                                   std::vector<std::vector<double>>& gi) {
                               for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t j = 0; j < d; ++j) gi[0][r * d + j] += g[r] * weights[r * d + j];
                               }
                           });
}

// (a x d), (b x d) -> (a x b) squared Euclidean distances via
// |u|^2 + |v|^2 - 2 u.v, clamped at 0. Clamped entries pass no gradient.
inline Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
    detail::require_rank("pairwise_sqdist", a, 2);
    detail::require_rank("pairwise_sqdist", b, 2);
    const std::size_t na = a.extent(0), nb = b.extent(0), d = a.extent(1);
    if (b.extent(1) != d) {
        throw ShapeError("pairwise_sqdist: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> an(na, 0.0), bn(nb, 0.0);
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t p = 0; p < d; ++p) an[i] += av[i * d + p] * av[i * d + p];
    for (std::size_t j = 0; j < nb; ++j)
        for (std::size_t p = 0; p < d; ++p) bn[j] += bv[j * d + p] * bv[j * d + p];
    std::vector<double> out(na * nb);
    std::vector<char> active(na * nb);
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            double dot = 0.0;
            for (std::size_t p = 0; p < d; ++p) dot += av[i * d + p] * bv[j * d + p];
            const double raw = an[i] + bn[j] - 2.0 * dot;
            active[i * nb + j] = raw > 0.0;
            out[i * nb + j] = raw > 0.0 ? raw : 0.0;
        }
    }
    return Tensor::from_op(
        "pairwise_sqdist", Shape{na, nb}, std::move(out), {a, b},
        [a, b, na, nb, d, active = std::move(active)](std::span<const double> g,
                                                      std::vector<std::vector<double>>& gi) {
            auto av = a.values();
            auto bv = b.values();
            for (std::size_t i = 0; i < na; ++i) {
                for (std::size_t j = 0; j < nb; ++j) {
                    if (!active[i * nb + j]) continue;
                    const double gij = 2.0 * g[i * nb + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < d; ++p) {
                        const double diff = av[i * d + p] - bv[j * d + p];
                        gi[0][i * d + p] += gij * diff;
                        gi[1][j * d + p] -= gij * diff;
                    }
                }
            }
        });
}

// Gathers rows (leading-axis slices) of a. Gradients scatter-add back.
inline Tensor index_select(const Tensor& a, std::span<const std::size_t> indices) {
    if (a.rank() == 0) throw ShapeError("index_select: scalar input");
    if (indices.empty()) throw ShapeError("index_select: empty index list");
    const std::size_t n = a.extent(0);
    const std::size_t row = a.size() / n;
    for (std::size_t ix : indices) {
        if (ix >= n) throw ShapeError("index_select: index " + std::to_string(ix) + " out of range");
    }
    auto av = a.values();
    std::vector<double> out(indices.size() * row);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        std::copy_n(&av[indices[r] * row], row, &out[r * row]);
    }
    Shape shape = a.shape();
    shape[0] = indices.size();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return Tensor::from_op("index_select", std::move(shape), std::move(out), {a},
                           [idx = std::move(idx), row](std::span<const double> g,
                                                       std::vector<std::vector<double>>& gi) {
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                   for (std::size_t c = 0; c < row; ++c) gi[0][idx[r] * row + c] += g[r * row + c];
                               }
                           });
}

enum class Primitive {
    Matmul,
    Add,
    Subtract,
    Multiply,
    Square,
    Relu,
    Exp,
    Log,
    Sum,
    Mean,
    SoftmaxLast,
    LogSumExpLast,
    PairwiseSqDist,
    Detach,
    IndexSelect,  // inputs: source, constant tensor of integral row indices
};

inline const char* primitive_name(Primitive kind) {
    switch (kind) {
        case Primitive::Matmul: return "matmul";
        case Primitive::Add: return "add";
        case Primitive::Subtract: return "subtract";
        case Primitive::Multiply: return "multiply";
        case Primitive::Square: return "square";
        case Primitive::Relu: return "relu";
        case Primitive::Exp: return "exp";
        case Primitive::Log: return "log";
        case Primitive::Sum: return "sum";
        case Primitive::Mean: return "mean";
        case Primitive::SoftmaxLast: return "softmax_last";
        case Primitive::LogSumExpLast: return "logsumexp_last";
        case Primitive::PairwiseSqDist: return "pairwise_sqdist";
        case Primitive::Detach: return "detach";
        case Primitive::IndexSelect: return "index_select";
    }
    return "?";
}

inline std::size_t primitive_arity(Primitive kind) {
    switch (kind) {
        case Primitive::Matmul:
        case Primitive::Add:
        case Primitive::Subtract:
        case Primitive::Multiply:
        case Primitive::PairwiseSqDist:
        case Primitive::IndexSelect: return 2;
        default: return 1;
    }
}

// Tag-dispatched entry point over the primitive set.
inline Tensor apply_primitive(Primitive kind, std::span<const Tensor> inputs) {
    if (inputs.size() != primitive_arity(kind)) {
        throw ShapeError(std::string(primitive_name(kind)) + ": expected " +
                         std::to_string(primitive_arity(kind)) + " inputs, got " + std::to_string(inputs.size()));
    }
    switch (kind) {
        case Primitive::Matmul: return matmul(inputs[0], inputs[1]);
        case Primitive::Add: return add(inputs[0], inputs[1]);
        case Primitive::Subtract: return sub(inputs[0], inputs[1]);
        case Primitive::Multiply: return mul(inputs[0], inputs[1]);
        case Primitive::Square: return square(inputs[0]);
        case Primitive::Relu: return relu(inputs[0]);
        case Primitive::Exp: return exp(inputs[0]);
        case Primitive::Log: return log(inputs[0]);
        case Primitive::Sum: return sum(inputs[0]);
        case Primitive::Mean: return mean(inputs[0]);
        case Primitive::SoftmaxLast: return softmax_last(inputs[0]);
        case Primitive::LogSumExpLast: return logsumexp_last(inputs[0]);
        case Primitive::PairwiseSqDist: return pairwise_sqdist(inputs[0], inputs[1]);
        case Primitive::Detach: return detach(inputs[0]);
        case Primitive::IndexSelect: {
            std::vector<std::size_t> idx;
            idx.reserve(inputs[1].size());
            for (double v : inputs[1].values()) {
                if (v < 0.0 || v != std::floor(v)) throw ShapeError("index_select: non-integral index");
                idx.push_back(static_cast<std::size_t>(v));
            }
            return index_select(inputs[0], idx);
        }
    }
    throw ShapeError("unknown primitive");
}

}  // namespace otvq
