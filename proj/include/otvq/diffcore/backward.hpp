#pragma once

#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "otvq/diffcore/tensor.hpp"

namespace otvq {

/// Gradients of a scalar with respect to the leaves that reached it.
///
/// Leaves that were not reachable (never used, or used only through
/// detach()) have no entry; get() reports zeros of the leaf's shape for them.
class GradientMap {
public:
    bool contains(const Tensor& leaf) const { return grads_.count(leaf.id()) != 0; }

    Tensor get(const Tensor& leaf) const {
        auto it = grads_.find(leaf.id());
        if (it == grads_.end()) return Tensor::zeros(leaf.shape());
        return it->second;
    }

    std::size_t size() const { return grads_.size(); }
    const std::map<NodeId, Tensor>& entries() const { return grads_; }

    void store(NodeId leaf, const Shape& shape, std::vector<double> grad) {
        grads_.insert_or_assign(leaf, Tensor::constant(shape, std::move(grad)));
    }

private:
    std::map<NodeId, Tensor> grads_;
};

inline GradientMap backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw ShapeError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
    }
    GradientMap result;
    if (!loss.requires_grad()) return result;

    // Post-order DFS gives a topological order (inputs before consumers).
    std::vector<const detail::Node*> order;
    std::unordered_map<const detail::Node*, std::size_t> state;  // 1 = open, 2 = done
    std::vector<std::pair<const detail::Node*, std::size_t>> stack;
    stack.emplace_back(&loss.node(), 0);
    state[&loss.node()] = 1;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            const detail::Node* child = &node->inputs[next++].node();
            if (!child->requires_grad) continue;
            auto it = state.find(child);
            if (it == state.end()) {
                state[child] = 1;
                stack.emplace_back(child, 0);
            } else if (it->second == 1) {
                throw ValueError("backward: cycle in computation graph");
            }
        } else {
            state[node] = 2;
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_map<const detail::Node*, std::vector<double>> grads;
    grads[&loss.node()] = std::vector<double>(1, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const detail::Node* node = *it;
        auto git = grads.find(node);
        if (git == grads.end()) continue;
        if (node->inputs.empty()) continue;
        std::vector<std::vector<double>> gi;
        gi.reserve(node->inputs.size());
        for (const auto& in : node->inputs) gi.emplace_back(in.size(), 0.0);
        node->backward(git->second, gi);
        for (std::size_t k = 0; k < node->inputs.size(); ++k) {
            const detail::Node* in = &node->inputs[k].node();
            if (!in->requires_grad) continue;
            auto& acc = grads[in];
            if (acc.empty()) {
                acc = std::move(gi[k]);
            } else {
                for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gi[k][i];
            }
        }
        if (node != &loss.node()) grads.erase(git);
    }

    for (const detail::Node* node : order) {
        if (!node->inputs.empty()) continue;
        auto git = grads.find(node);
        if (git == grads.end()) continue;
        for (double g : git->second) {
            if (!std::isfinite(g)) throw NumericError("backward: non-finite gradient");
        }
        result.store(node->id, node->shape, std::move(git->second));
    }
    return result;
}

}  // namespace otvq
