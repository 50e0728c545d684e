#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "otvq/errors.hpp"

namespace otvq {

using Shape = std::vector<std::size_t>;
using NodeId = std::uint64_t;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

class Tensor;

namespace detail {

// Receives the gradient flowing into a node's output and accumulates the
// contributions into one buffer per input (same length as that input's values).
using BackwardFn = std::function<void(std::span<const double> grad_out,
                                      std::vector<std::vector<double>>& grad_inputs)>;

inline NodeId next_node_id() {
    static std::atomic<NodeId> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

struct Node {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    NodeId id = 0;
    const char* op = "leaf";
    std::vector<Tensor> inputs;
    BackwardFn backward;
};

}  // namespace detail

/// Immutable dense array of f64 values with an optional position in a
/// dynamically recorded computation graph.
///
/// Copies are cheap handles to the same node. Values never change after
/// construction, so tensors may be shared freely between threads.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> values) {
        return make(std::move(shape), std::move(values), false);
    }

    // Leaf that gradients are reported for.
    static Tensor parameter(Shape shape, std::vector<double> values) {
        return make(std::move(shape), std::move(values), true);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<double> v(shape_size(shape), 0.0);
        return make(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return make(Shape{}, {value}, requires_grad);
    }

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node().shape; }
    std::size_t rank() const { return node().shape.size(); }
    std::size_t extent(std::size_t axis) const { return node().shape.at(axis); }
    std::size_t size() const { return node().values.size(); }
    std::span<const double> values() const { return node().values; }
    double operator[](std::size_t i) const { return node().values[i]; }
    double item() const {
        if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
        return node().values[0];
    }
    bool requires_grad() const { return node().requires_grad; }
    NodeId id() const { return node().id; }
    const char* op_name() const { return node().op; }
    bool is_leaf() const { return node().inputs.empty(); }

    const detail::Node& node() const {
        if (!node_) throw ValueError("use of undefined tensor");
        return *node_;
    }

    // Builds the output of a primitive. The graph edge is kept only when
    // some input participates in differentiation.
    static Tensor from_op(const char* op, Shape shape, std::vector<double> values,
                          std::vector<Tensor> inputs, detail::BackwardFn backward) {
        for (double v : values) {
            if (!std::isfinite(v)) {
                throw NumericError(std::string("non-finite result in primitive '") + op + "'");
            }
        }
        bool any = false;
        for (const auto& t : inputs) any = any || t.requires_grad();
        auto n = std::make_shared<detail::Node>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        n->requires_grad = any;
        n->id = detail::next_node_id();
        n->op = op;
        if (any) {
            n->inputs = std::move(inputs);
            n->backward = std::move(backward);
        }
        return Tensor(std::move(n));
    }

private:
    explicit Tensor(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}

    static Tensor make(Shape shape, std::vector<double> values, bool requires_grad) {
        if (shape_size(shape) != values.size()) {
            throw ShapeError("shape " + shape_string(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
        }
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeError("zero extent in shape " + shape_string(shape));
        }
        for (double v : values) {
            if (!std::isfinite(v)) throw NumericError("non-finite value in tensor construction");
        }
        auto n = std::make_shared<detail::Node>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        n->requires_grad = requires_grad;
        n->id = detail::next_node_id();
        return Tensor(std::move(n));
    }

    std::shared_ptr<const detail::Node> node_;
};

}  // namespace otvq
