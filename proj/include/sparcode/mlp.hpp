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

// Minimal dense MLP with analytic backprop. Inverted dropout can be applied
// to hidden-layer outputs during training; the mask is recorded in the trace
// so the backward pass replays it.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/matrix.hpp"
#include "sparcode/rng.hpp"

namespace sparcode {

enum class Activation { identity, relu };

template <typename T>
struct DenseLayer {
    Matrix<T> weight;         // out x in
    std::vector<T> bias;      // out
    Activation act = Activation::identity;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
};

template <typename T>
struct Mlp {
    std::vector<DenseLayer<T>> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
};

template <typename T>
struct MlpTrace {
    std::vector<std::vector<T>> inputs;   // input to each layer
    std::vector<std::vector<T>> pre;      // pre-activation per layer
    std::vector<std::vector<T>> mask;     // dropout keep-scale per layer, empty if none
    std::vector<T> output;
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
template <typename T>
inline DenseLayer<T> make_dense_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer<T> layer;
    layer.weight = Matrix<T>(out, in);
    layer.bias.assign(out, T(0));
    layer.act = act;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : layer.weight.data) w = static_cast<T>(rng.uniform(-bound, bound));
    return layer;
}

template <typename T>
inline Mlp<T> make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                       Activation final_act, Rng& rng) {
    Mlp<T> mlp;
    std::size_t prev = in;
    for (std::size_t h : hidden) {
        mlp.layers.push_back(make_dense_layer<T>(prev, h, Activation::relu, rng));
        prev = h;
    }
    mlp.layers.push_back(make_dense_layer<T>(prev, out, final_act, rng));
    return mlp;
}

template <typename T>
inline void check_chain(const Mlp<T>& mlp, const std::string& name) {
    for (std::size_t l = 0; l + 1 < mlp.layers.size(); ++l) {
        if (mlp.layers[l].out_dim() != mlp.layers[l + 1].in_dim()) {
            throw ShapeError(name + ": layer " + std::to_string(l) + " output width " +
                             std::to_string(mlp.layers[l].out_dim()) + " != layer " +
                             std::to_string(l + 1) + " input width " +
                             std::to_string(mlp.layers[l + 1].in_dim()));
        }
    }
}

namespace detail {

template <typename T>
inline std::vector<T> layer_forward(const DenseLayer<T>& layer, std::span<const T> x,
                                    std::vector<T>* pre_out = nullptr) {
    if (x.size() != layer.in_dim()) {
        throw ShapeError("mlp_apply: input length " + std::to_string(x.size()) +
                         " != layer input width " + std::to_string(layer.in_dim()));
    }
    std::vector<T> pre(layer.out_dim());
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        T acc = layer.bias[o];
        const T* wrow = layer.weight.data.data() + o * layer.weight.cols;
        for (std::size_t i = 0; i < x.size(); ++i) acc += wrow[i] * x[i];
        pre[o] = acc;
    }
    std::vector<T> out = pre;
    if (layer.act == Activation::relu) {
        for (auto& v : out) v = v > T(0) ? v : T(0);
    }
    if (pre_out) *pre_out = std::move(pre);
    return out;
}

}  // namespace detail

template <typename T>
inline std::vector<T> mlp_apply(std::span<const T> x, const Mlp<T>& mlp) {
    std::vector<T> cur(x.begin(), x.end());
    for (const auto& layer : mlp.layers) {
        cur = detail::layer_forward(layer, std::span<const T>(cur));
    }
    return cur;
}

// Forward with trace; dropout (if rate > 0 and rng given) hits hidden layer
// outputs only, never the final layer.
template <typename T>
inline std::vector<T> mlp_apply_trace(std::span<const T> x, const Mlp<T>& mlp, MlpTrace<T>& trace,
                                      double dropout_rate = 0.0, Rng* rng = nullptr) {
    const std::size_t n_layers = mlp.layers.size();
    trace.inputs.assign(n_layers, {});
    trace.pre.assign(n_layers, {});
    trace.mask.assign(n_layers, {});
    std::vector<T> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        trace.inputs[l] = cur;
        cur = detail::layer_forward(mlp.layers[l], std::span<const T>(cur), &trace.pre[l]);
        const bool hidden = l + 1 < n_layers;
        if (hidden && dropout_rate > 0.0 && rng != nullptr) {
            const T scale = static_cast<T>(1.0 / (1.0 - dropout_rate));
            trace.mask[l].resize(cur.size());
            for (std::size_t i = 0; i < cur.size(); ++i) {
                const T keep = rng->uniform() < dropout_rate ? T(0) : scale;
                trace.mask[l][i] = keep;
                cur[i] *= keep;
            }
        }
    }
    trace.output = cur;
    return cur;
}

// Accumulates parameter gradients into `grads` (same shape as `mlp`) and
// returns the gradient w.r.t. the input via `grad_x` when non-null.
// ReLU uses subgradient 0 at pre-activation 0.
template <typename T>
inline void mlp_backward(const Mlp<T>& mlp, const MlpTrace<T>& trace, std::span<const T> upstream,
                         Mlp<T>& grads, std::vector<T>* grad_x = nullptr) {
    if (upstream.size() != mlp.output_dim()) {
        throw ShapeError("mlp_backward: upstream length " + std::to_string(upstream.size()) +
                         " != output width " + std::to_string(mlp.output_dim()));
    }
    std::vector<T> g(upstream.begin(), upstream.end());
    for (std::size_t li = mlp.layers.size(); li-- > 0;) {
        const auto& layer = mlp.layers[li];
        auto& glayer = grads.layers[li];
        if (!trace.mask[li].empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= trace.mask[li][i];
        }
        if (layer.act == Activation::relu) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!(trace.pre[li][i] > T(0))) g[i] = T(0);
            }
        }
        const auto& x = trace.inputs[li];
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            glayer.bias[o] += g[o];
            T* gw = glayer.weight.data.data() + o * glayer.weight.cols;
            for (std::size_t i = 0; i < x.size(); ++i) gw[i] += g[o] * x[i];
        }
        std::vector<T> gx(layer.in_dim(), T(0));
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            const T* wrow = layer.weight.data.data() + o * layer.weight.cols;
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += wrow[i] * g[o];
        }
        g = std::move(gx);
    }
    if (grad_x) *grad_x = std::move(g);
}

template <typename T>
inline Mlp<T> zeros_like(const Mlp<T>& mlp) {
    Mlp<T> out;
    out.layers.reserve(mlp.layers.size());
    for (const auto& layer : mlp.layers) {
        DenseLayer<T> z;
        z.weight = Matrix<T>(layer.weight.rows, layer.weight.cols);
        z.bias.assign(layer.bias.size(), T(0));
        z.act = layer.act;
        out.layers.push_back(std::move(z));
    }
    return out;
}

}  // namespace sparcode
