/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/tape.hpp"
#include "gssc/error.hpp"

#include <fmt/format.h>

namespace gssc {

    const NdBuffer& Var::value() const { return tape->value(*this); }

    Var Tape::push(Node node) {
        nodes_.push_back(std::move(node));
        return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    Var Tape::constant(NdBuffer value) {
        Node n;
        n.op = "constant";
        n.value = std::move(value);
        n.is_leaf = true;
        return push(std::move(n));
    }

    Var Tape::leaf(NdBuffer value) {
        Node n;
        n.op = "leaf";
        n.value = std::move(value);
        n.requires_grad = true;
        n.is_leaf = true;
        return push(std::move(n));
    }

    Var Tape::record(const char* op, NdBuffer value, std::initializer_list<Var> inputs, Backward backward) {
        return record(op, std::move(value), std::vector<Var>(inputs), std::move(backward));
    }

    Var Tape::record(const char* op, NdBuffer value, const std::vector<Var>& inputs, Backward backward) {
        Node n;
        n.op = op;
        n.value = std::move(value);
        for (const Var& in : inputs) {
            if (in.tape != this)
                throw Error(fmt::format("op '{}' received a variable from another tape", op));
            n.inputs.push_back(in.id);
            n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
        }
        if (n.requires_grad)
            n.backward = std::move(backward);
        return push(std::move(n));
    }

    NdBuffer* Tape::grad_slot(Var v) {
        Node& n = nodes_[v.id];
        if (!n.requires_grad)
            return nullptr;
        if (!n.has_grad) {
            n.grad = NdBuffer(n.value.shape(), 0.0);
            n.has_grad = true;
        }
        return &n.grad;
    }

    const NdBuffer* Tape::grad(Var v) const {
        const Node& n = nodes_[v.id];
        return n.has_grad ? &n.grad : nullptr;
    }

    void Tape::backward(Var root) {
        if (value(root).size() != 1)
            throw DimensionError(fmt::format("backward() without seed needs a scalar root, got {}",
                                             shape_string(value(root).shape())));
        backward(root, NdBuffer(value(root).shape(), 1.0));
    }

    void Tape::backward(Var root, const NdBuffer& seed) {
        require_same_shape(value(root), seed, "Tape::backward seed");
        for (auto& n : nodes_) {
            n.has_grad = false;
            n.grad = NdBuffer();
        }
        if (!nodes_[root.id].requires_grad)
            return;
        nodes_[root.id].grad = seed;
        nodes_[root.id].has_grad = true;
        for (std::int32_t id = root.id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.has_grad || n.is_leaf || !n.backward)
                continue;
            n.backward(*this, n.grad);
            // Interior gradients are consumed exactly once; release them.
            n.grad = NdBuffer();
            n.has_grad = false;
        }
    }

} // namespace gssc
