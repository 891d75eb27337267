// Copyright 2026 The SparCode Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/io.hpp"

namespace sparcode {

// A named view over one parameter block (weights of one layer, one table, ...).
template <typename T>
struct ParamRef {
    std::string name;
    T* data = nullptr;
    std::size_t size = 0;

    std::span<T> span() { return {data, size}; }
    std::span<const T> span() const { return {data, size}; }
};

template <typename T>
struct AdamState {
    long step = 0;
    std::vector<T> m;  // first moment, flat over all parameter blocks
    std::vector<T> v;  // second moment
    T lr = T(0.001);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
};

template <typename T>
inline AdamState<T> make_adam_state(const std::vector<ParamRef<T>>& params, T lr,
                                    T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8)) {
    std::size_t total = 0;
    for (const auto& p : params) total += p.size;
    AdamState<T> state;
    state.m.assign(total, T(0));
    state.v.assign(total, T(0));
    state.lr = lr;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.eps = eps;
    return state;
}

// Standard Adam with bias correction. Parameter and gradient blocks must be
// aligned; a non-finite gradient aborts with the offending block's name.
template <typename T>
inline void adam_step(std::vector<ParamRef<T>>& params, const std::vector<ParamRef<const T>>& grads,
                      AdamState<T>& state) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: block count mismatch");
    std::size_t total = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size != grads[b].size) {
            throw ShapeError("adam_step: size mismatch for parameter '" + params[b].name + "'");
        }
        if (!all_finite(grads[b].data, grads[b].size)) {
            throw NumericError("adam_step: non-finite gradient for parameter '" + params[b].name + "'");
        }
        total += params[b].size;
    }
    if (total != state.m.size()) throw ShapeError("adam_step: state size mismatch");

    state.step += 1;
    const T b1 = state.beta1;
    const T b2 = state.beta2;
    const T corr1 = T(1) - static_cast<T>(std::pow(static_cast<double>(b1), state.step));
    const T corr2 = T(1) - static_cast<T>(std::pow(static_cast<double>(b2), state.step));
    std::size_t off = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        T* p = params[b].data;
        const T* g = grads[b].data;
        for (std::size_t i = 0; i < params[b].size; ++i) {
            T& m = state.m[off + i];
            T& v = state.v[off + i];
            m = b1 * m + (T(1) - b1) * g[i];
            v = b2 * v + (T(1) - b2) * g[i] * g[i];
            const T mhat = m / corr1;
            const T vhat = v / corr2;
            p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        off += params[b].size;
    }
}

}  // namespace sparcode
