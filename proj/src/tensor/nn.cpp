/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/nn.hpp"
#include "gssc/error.hpp"
#include "gssc/ops.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gssc {

    ParamId ParamStore::add(std::string name, NdBuffer init) {
        names_.push_back(std::move(name));
        values_.push_back(std::move(init));
        return ParamId{static_cast<std::int32_t>(values_.size() - 1)};
    }

    std::size_t ParamStore::total_elements() const {
        std::size_t n = 0;
        for (const auto& v : values_)
            n += v.size();
        return n;
    }

    NdBuffer ParamStore::flatten() const {
        std::vector<double> flat;
        flat.reserve(total_elements());
        for (const auto& v : values_)
            flat.insert(flat.end(), v.data().begin(), v.data().end());
        return NdBuffer::vector(std::move(flat));
    }

    void ParamStore::unflatten(const NdBuffer& flat) {
        if (flat.size() != total_elements())
            throw DimensionError(fmt::format("parameter vector has {} values, model expects {}", flat.size(),
                                             total_elements()));
        std::size_t offset = 0;
        for (auto& v : values_) {
            std::copy_n(flat.ptr() + offset, v.size(), v.ptr());
            offset += v.size();
        }
    }

    Graph::Graph(Tape& tape, const ParamStore& store) : tape_(tape), store_(store), vars_(store.size()) {}

    Graph::Graph(Tape& tape, const ParamStore& store, std::span<const Var> bound)
        : tape_(tape),
          store_(store),
          vars_(bound.begin(), bound.end()) {
        if (vars_.size() != store.size())
            throw DimensionError(fmt::format("graph binds {} variables to {} parameters", vars_.size(), store.size()));
    }

    Var Graph::param(ParamId id) {
        Var& v = vars_.at(static_cast<std::size_t>(id.index));
        if (!v.valid())
            v = tape_.leaf(store_.value(id));
        return v;
    }

    std::vector<NdBuffer> Graph::gradients() const {
        std::vector<NdBuffer> grads;
        grads.reserve(vars_.size());
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            const NdBuffer* g = vars_[i].valid() ? tape_.grad(vars_[i]) : nullptr;
            grads.push_back(g ? *g : NdBuffer(store_.values()[i].shape(), 0.0));
        }
        return grads;
    }

    NdBuffer uniform_buffer(Shape shape, double bound, Rng& rng) {
        NdBuffer b(std::move(shape));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : b.storage())
            v = dist(rng);
        return b;
    }

    Linear make_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                       double gain) {
        const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
        Linear l;
        l.in = in;
        l.out = out;
        l.weight = store.add(name + ".weight", uniform_buffer({in, out}, bound, rng));
        l.bias = store.add(name + ".bias", NdBuffer({out}, 0.0));
        return l;
    }

    Var apply(Graph& g, const Linear& layer, Var x) {
        return ops::add_bias(ops::matmul(x, g.param(layer.weight)), g.param(layer.bias));
    }

    Mlp make_mlp(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                 Rng& rng, double out_gain) {
        Mlp m;
        m.first = make_linear(store, name + ".0", in, hidden, rng);
        m.second = make_linear(store, name + ".1", hidden, out, rng, out_gain);
        return m;
    }

    Var apply(Graph& g, const Mlp& mlp, Var x) {
        return apply(g, mlp.second, ops::silu(apply(g, mlp.first, x)));
    }

} // namespace gssc
