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

// Tokenizer: mean-pool the input embedding rows, run the trunk MLP, then
// apply k independent affine heads to produce the k token embeddings.

#pragma once

#include <cstddef>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/matrix.hpp"
#include "sparcode/mlp.hpp"

namespace sparcode {

template <typename T>
struct Tokenizer {
    Mlp<T> trunk;                        // D -> trunk_out (ReLU hidden, identity final)
    std::vector<DenseLayer<T>> heads;    // k affine maps trunk_out -> D_T

    std::size_t num_tokens() const { return heads.size(); }
    std::size_t token_dim() const { return heads.empty() ? 0 : heads.front().out_dim(); }
    std::size_t input_dim() const { return trunk.input_dim(); }
};

template <typename T>
struct TokenizerTrace {
    std::size_t pooled_rows = 0;
    std::vector<T> pooled;
    MlpTrace<T> trunk;
    std::vector<T> trunk_out;
};

// identity_init starts square affine maps at the identity (heads with a small
// per-head jitter so tokens differ); non-square or hidden layers keep the
// uniform init.
template <typename T>
inline Tokenizer<T> make_tokenizer(std::size_t in_dim, const std::vector<std::size_t>& trunk_hidden,
                                   std::size_t token_dim, std::size_t num_tokens, Rng& rng,
                                   bool identity_init = false, double head_jitter = 0.1) {
    Tokenizer<T> tok;
    tok.trunk = make_mlp<T>(in_dim, trunk_hidden, in_dim, Activation::identity, rng);
    if (identity_init && trunk_hidden.empty()) {
        auto& layer = tok.trunk.layers.front();
        layer.weight.fill(T(0));
        for (std::size_t i = 0; i < in_dim; ++i) layer.weight.at(i, i) = T(1);
    }
    tok.heads.reserve(num_tokens);
    const double jitter = head_jitter / std::sqrt(static_cast<double>(in_dim));
    for (std::size_t i = 0; i < num_tokens; ++i) {
        auto head = make_dense_layer<T>(in_dim, token_dim, Activation::identity, rng);
        if (identity_init && in_dim == token_dim) {
            for (std::size_t r = 0; r < token_dim; ++r) {
                for (std::size_t c = 0; c < in_dim; ++c) {
                    head.weight.at(r, c) =
                        (r == c ? T(1) : T(0)) + static_cast<T>(rng.uniform(-jitter, jitter));
                }
            }
        }
        tok.heads.push_back(std::move(head));
    }
    return tok;
}

// H is one embedding row per input feature; returns a k x D_T token matrix.
template <typename T>
inline Matrix<T> tokenize(const Matrix<T>& h, const Tokenizer<T>& tok,
                          TokenizerTrace<T>* trace = nullptr, double dropout = 0.0,
                          Rng* rng = nullptr) {
    if (h.rows == 0) throw DataError("tokenize: empty input");
    if (h.cols != tok.input_dim()) {
        throw ShapeError("tokenize: input width " + std::to_string(h.cols) +
                         " != trunk input width " + std::to_string(tok.input_dim()));
    }
    std::vector<T> pooled = mean_rows(h);
    std::vector<T> z;
    if (trace) {
        trace->pooled_rows = h.rows;
        trace->pooled = pooled;
        z = mlp_apply_trace(std::span<const T>(pooled), tok.trunk, trace->trunk, dropout, rng);
        trace->trunk_out = z;
    } else {
        z = mlp_apply(std::span<const T>(pooled), tok.trunk);
    }
    Matrix<T> tokens(tok.num_tokens(), tok.token_dim());
    for (std::size_t i = 0; i < tok.heads.size(); ++i) {
        auto out = detail::layer_forward(tok.heads[i], std::span<const T>(z));
        auto dst = tokens.row(i);
        for (std::size_t c = 0; c < out.size(); ++c) dst[c] = out[c];
    }
    return tokens;
}

// Backprop from per-token gradients; returns the gradient w.r.t. the pooled
// vector's source rows as a single row gradient (each of the L input rows
// receives grad_pooled / L).
template <typename T>
inline std::vector<T> tokenize_backward(const Tokenizer<T>& tok, const TokenizerTrace<T>& trace,
                                        const Matrix<T>& d_tokens, Tokenizer<T>& grads) {
    if (d_tokens.rows != tok.num_tokens() || d_tokens.cols != tok.token_dim()) {
        throw ShapeError("tokenize_backward: token gradient shape mismatch");
    }
    std::vector<T> dz(trace.trunk_out.size(), T(0));
    for (std::size_t i = 0; i < tok.heads.size(); ++i) {
        const auto& head = tok.heads[i];
        auto& ghead = grads.heads[i];
        auto g = d_tokens.row(i);
        for (std::size_t o = 0; o < head.out_dim(); ++o) {
            ghead.bias[o] += g[o];
            T* gw = ghead.weight.data.data() + o * ghead.weight.cols;
            const T* wrow = head.weight.data.data() + o * head.weight.cols;
            for (std::size_t c = 0; c < head.in_dim(); ++c) {
                gw[c] += g[o] * trace.trunk_out[c];
                dz[c] += wrow[c] * g[o];
            }
        }
    }
    std::vector<T> d_pooled;
    mlp_backward(tok.trunk, trace.trunk, std::span<const T>(dz), grads.trunk, &d_pooled);
    const T inv = T(1) / static_cast<T>(trace.pooled_rows);
    for (auto& v : d_pooled) v *= inv;
    return d_pooled;  // per input row gradient
}

template <typename T>
inline Tokenizer<T> zeros_like(const Tokenizer<T>& tok) {
    Tokenizer<T> out;
    out.trunk = zeros_like(tok.trunk);
    out.heads.reserve(tok.heads.size());
    for (const auto& head : tok.heads) {
        DenseLayer<T> z;
        z.weight = Matrix<T>(head.weight.rows, head.weight.cols);
        z.bias.assign(head.bias.size(), T(0));
        z.act = head.act;
        out.heads.push_back(std::move(z));
    }
    return out;
}

}  // namespace sparcode
