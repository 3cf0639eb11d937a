/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gssc/tape.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gssc {

    using Rng = std::mt19937_64;

    struct ParamId {
        std::int32_t index = -1;
        [[nodiscard]] bool valid() const { return index >= 0; }
    };

    /// Named trainable buffers in registration order. The order defines the
    /// flattened checkpoint layout.
    class ParamStore {
    public:
        ParamId add(std::string name, NdBuffer init);

        [[nodiscard]] NdBuffer& value(ParamId id) { return values_.at(static_cast<std::size_t>(id.index)); }
        [[nodiscard]] const NdBuffer& value(ParamId id) const { return values_.at(static_cast<std::size_t>(id.index)); }
        [[nodiscard]] const std::string& name(std::size_t i) const { return names_.at(i); }
        [[nodiscard]] std::size_t size() const { return values_.size(); }
        [[nodiscard]] std::vector<NdBuffer>& values() { return values_; }
        [[nodiscard]] const std::vector<NdBuffer>& values() const { return values_; }
        [[nodiscard]] std::size_t total_elements() const;

        [[nodiscard]] NdBuffer flatten() const;
        /// Throws DimensionError if the element count differs.
        void unflatten(const NdBuffer& flat);

    private:
        std::vector<std::string> names_;
        std::vector<NdBuffer> values_;
    };

    /// One forward evaluation: a tape plus the leaf variable bound to each parameter.
    class Graph {
    public:
        Graph(Tape& tape, const ParamStore& store);
        /// Binds parameters to caller-provided variables (one per parameter, store order).
        Graph(Tape& tape, const ParamStore& store, std::span<const Var> bound);

        Var param(ParamId id);
        Var constant(NdBuffer value) { return tape_.constant(std::move(value)); }
        [[nodiscard]] Tape& tape() { return tape_; }

        /// Parameter gradients after tape().backward(); zeros where nothing flowed.
        [[nodiscard]] std::vector<NdBuffer> gradients() const;

    private:
        Tape& tape_;
        const ParamStore& store_;
        std::vector<Var> vars_;
    };

    struct Linear {
        ParamId weight;
        ParamId bias;
        std::size_t in = 0;
        std::size_t out = 0;
    };

    /// Glorot-uniform weights scaled by gain, zero bias.
    Linear make_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                       double gain = 1.0);
    Var apply(Graph& g, const Linear& layer, Var x);

    /// Two-layer perceptron with a SiLU hidden activation.
    struct Mlp {
        Linear first;
        Linear second;
    };

    Mlp make_mlp(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                 Rng& rng, double out_gain = 1.0);
    Var apply(Graph& g, const Mlp& mlp, Var x);

    NdBuffer uniform_buffer(Shape shape, double bound, Rng& rng);

} // namespace gssc
