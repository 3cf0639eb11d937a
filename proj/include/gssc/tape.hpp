/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/ndbuffer.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

namespace gssc {

    class Tape;

    /// Handle to a value recorded on a Tape.
    struct Var {
        Tape* tape = nullptr;
        std::int32_t id = -1;

        [[nodiscard]] bool valid() const { return tape != nullptr && id >= 0; }
        [[nodiscard]] const NdBuffer& value() const;
        [[nodiscard]] const Shape& shape() const { return value().shape(); }
    };

    /// Reverse-mode record. Each node stores its forward value, the ids of its
    /// inputs and a vector-Jacobian product closure. Nodes are appended in
    /// evaluation order, so replaying them backwards is a topological order.
    class Tape {
    public:
        /// Receives the gradient flowing into the node's output and accumulates
        /// into its inputs through Tape::grad_slot.
        using Backward = std::function<void(Tape&, const NdBuffer& out_grad)>;

        Tape() = default;
        Tape(const Tape&) = delete;
        Tape& operator=(const Tape&) = delete;

        Var constant(NdBuffer value);
        Var leaf(NdBuffer value);

        /// Records an op result. The closure is dropped when no input needs a gradient.
        Var record(const char* op, NdBuffer value, std::initializer_list<Var> inputs, Backward backward);
        Var record(const char* op, NdBuffer value, const std::vector<Var>& inputs, Backward backward);

        [[nodiscard]] const NdBuffer& value(Var v) const { return nodes_[v.id].value; }
        [[nodiscard]] bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
        [[nodiscard]] const char* op_name(Var v) const { return nodes_[v.id].op; }
        [[nodiscard]] std::size_t size() const { return nodes_.size(); }

        /// Zero-initialised accumulation buffer for v, or nullptr when v does not
        /// need a gradient. Only valid during backward().
        NdBuffer* grad_slot(Var v);

        /// Gradient accumulated for v by the last backward(); nullptr if none reached it.
        [[nodiscard]] const NdBuffer* grad(Var v) const;

        /// Replays the tape from a scalar root (seed 1).
        void backward(Var root);
        /// Replays the tape with an explicit output gradient.
        void backward(Var root, const NdBuffer& seed);

    private:
        struct Node {
            const char* op = "";
            NdBuffer value;
            NdBuffer grad;
            bool has_grad = false;
            bool requires_grad = false;
            bool is_leaf = false;
            std::vector<std::int32_t> inputs;
            Backward backward;
        };

        Var push(Node node);

        std::deque<Node> nodes_;
    };

} // namespace gssc
