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

// All-to-all interaction scorer between one quantized query token and the
// item token matrix. The quantized query embedding is a stop-gradient input:
// backward produces gradients for the scorer parameters and the item tokens,
// never for the query embedding or the codewords behind it.

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/matrix.hpp"
#include "sparcode/mlp.hpp"

namespace sparcode {

enum class InteractionKind { dot_product, maxsim, crossnet, dnn, inner_pdnn };

inline std::string interaction_kind_name(InteractionKind k) {
    switch (k) {
        case InteractionKind::dot_product: return "dot_product";
        case InteractionKind::maxsim: return "maxsim";
        case InteractionKind::crossnet: return "crossnet";
        case InteractionKind::dnn: return "dnn";
        case InteractionKind::inner_pdnn: return "inner_pdnn";
    }
    return "?";
}

inline InteractionKind interaction_kind_from_name(const std::string& s) {
    if (s == "dot_product") return InteractionKind::dot_product;
    if (s == "maxsim") return InteractionKind::maxsim;
    if (s == "crossnet") return InteractionKind::crossnet;
    if (s == "dnn") return InteractionKind::dnn;
    if (s == "inner_pdnn") return InteractionKind::inner_pdnn;
    throw ConfigError("unknown interaction kind: " + s);
}

template <typename T>
struct CrossLayer {
    std::vector<T> weight;
    std::vector<T> bias;
};

template <typename T>
struct InteractionParams {
    InteractionKind kind = InteractionKind::inner_pdnn;
    Mlp<T> mlp;                          // dnn / inner_pdnn
    std::vector<CrossLayer<T>> cross;    // crossnet, exactly 3 layers
    std::vector<T> cross_out_w;          // crossnet final linear to scalar
    T cross_out_b = T(0);
    std::vector<T> bias;                 // learnable train bias b; size 1 or K_u
};

inline constexpr std::size_t kCrossNetLayers = 3;

template <typename T>
inline InteractionParams<T> make_interaction_params(InteractionKind kind, std::size_t token_dim,
                                                    std::size_t item_tokens,
                                                    const std::vector<std::size_t>& hidden,
                                                    bool per_token_bias, std::size_t query_tokens,
                                                    Rng& rng) {
    InteractionParams<T> p;
    p.kind = kind;
    // b starts at 1 so ReLU(S + b) is live for typical init-scale scores; a
    // zero start can clip every pair at once and freeze the match loss.
    p.bias.assign(per_token_bias ? query_tokens : 1, T(1));
    const std::size_t concat_dim = (1 + item_tokens) * token_dim;
    switch (kind) {
        case InteractionKind::dot_product:
        case InteractionKind::maxsim:
            break;
        case InteractionKind::dnn:
            p.mlp = make_mlp<T>(concat_dim, hidden, 1, Activation::identity, rng);
            break;
        case InteractionKind::inner_pdnn:
            p.mlp = make_mlp<T>(item_tokens * token_dim, hidden, 1, Activation::identity, rng);
            // Start at the inner-product solution. With one hidden layer wide
            // enough, unit pair (2j, 2j+1) carries (relu(z_j), relu(-z_j))
            // and the output reconstructs sum_j z_j exactly, so training
            // begins at the plain dot product and per-coordinate reweighting
            // of the positive parts expresses max-style bonuses directly.
            // Otherwise a single reserved pair carries (relu(s), relu(-s))
            // for s = sum_j z_j through the stack.
            if (hidden.size() == 1 && hidden[0] >= 2 * p.mlp.input_dim()) {
                const std::size_t in = p.mlp.input_dim();
                auto& first = p.mlp.layers.front();
                auto& out = p.mlp.layers.back();
                for (std::size_t c = 0; c < out.in_dim(); ++c) out.weight.at(0, c) = T(0);
                for (std::size_t j = 0; j < in; ++j) {
                    for (std::size_t c = 0; c < in; ++c) {
                        first.weight.at(2 * j, c) = T(0);
                        first.weight.at(2 * j + 1, c) = T(0);
                    }
                    first.weight.at(2 * j, j) = T(1);
                    first.weight.at(2 * j + 1, j) = T(-1);
                    out.weight.at(0, 2 * j) = T(1);
                    out.weight.at(0, 2 * j + 1) = T(-1);
                }
            } else if (!hidden.empty() && hidden.front() >= 2) {
                auto& first = p.mlp.layers.front();
                for (std::size_t c = 0; c < first.in_dim(); ++c) {
                    first.weight.at(0, c) = T(1);
                    first.weight.at(1, c) = T(-1);
                }
                bool chain_ok = true;
                for (std::size_t l = 1; l < hidden.size(); ++l) {
                    if (hidden[l] < 2) {
                        chain_ok = false;
                        break;
                    }
                    auto& layer = p.mlp.layers[l];
                    for (std::size_t c = 0; c < layer.in_dim(); ++c) {
                        layer.weight.at(0, c) = T(0);
                        layer.weight.at(1, c) = T(0);
                    }
                    layer.weight.at(0, 0) = T(1);
                    layer.weight.at(0, 1) = T(-1);
                    layer.weight.at(1, 0) = T(-1);
                    layer.weight.at(1, 1) = T(1);
                }
                if (chain_ok) {
                    auto& out = p.mlp.layers.back();
                    for (std::size_t c = 0; c < out.in_dim(); ++c) out.weight.at(0, c) = T(0);
                    out.weight.at(0, 0) = T(1);
                    out.weight.at(0, 1) = T(-1);
                }
            }
            break;
        case InteractionKind::crossnet: {
            const double bound = 1.0 / std::sqrt(static_cast<double>(concat_dim));
            for (std::size_t l = 0; l < kCrossNetLayers; ++l) {
                CrossLayer<T> layer;
                layer.weight.resize(concat_dim);
                layer.bias.assign(concat_dim, T(0));
                for (auto& w : layer.weight) w = static_cast<T>(rng.uniform(-bound, bound));
                p.cross.push_back(std::move(layer));
            }
            p.cross_out_w.resize(concat_dim);
            for (auto& w : p.cross_out_w) w = static_cast<T>(rng.uniform(-bound, bound));
            p.cross_out_b = T(0);
            break;
        }
    }
    return p;
}

template <typename T>
inline void check_interaction_shapes(const InteractionParams<T>& p, std::size_t token_dim,
                                     std::size_t item_tokens) {
    const std::size_t concat_dim = (1 + item_tokens) * token_dim;
    switch (p.kind) {
        case InteractionKind::dot_product:
        case InteractionKind::maxsim:
            return;
        case InteractionKind::dnn:
            if (p.mlp.input_dim() != concat_dim) {
                throw ShapeError("dnn scorer: MLP input width " + std::to_string(p.mlp.input_dim()) +
                                 " != (1+K_c)*D_T = " + std::to_string(concat_dim));
            }
            break;
        case InteractionKind::inner_pdnn:
            if (p.mlp.input_dim() != item_tokens * token_dim) {
                throw ShapeError("inner_pdnn scorer: MLP input width " +
                                 std::to_string(p.mlp.input_dim()) + " != K_c*D_T = " +
                                 std::to_string(item_tokens * token_dim));
            }
            break;
        case InteractionKind::crossnet:
            if (p.cross.size() != kCrossNetLayers) {
                throw ShapeError("crossnet scorer: expected exactly 3 layers");
            }
            if (p.cross_out_w.size() != concat_dim || p.cross[0].weight.size() != concat_dim) {
                throw ShapeError("crossnet scorer: layer width != (1+K_c)*D_T");
            }
            break;
    }
    if ((p.kind == InteractionKind::dnn || p.kind == InteractionKind::inner_pdnn) &&
        p.mlp.output_dim() != 1) {
        throw ShapeError("scorer MLP must end in a single output unit");
    }
}

template <typename T>
struct ScorerTrace {
    std::vector<T> concat;                 // dnn / crossnet input, inner_pdnn products
    MlpTrace<T> mlp;                       // dnn / inner_pdnn
    std::vector<std::vector<T>> cross_x;   // x_0 .. x_3
    std::vector<T> cross_a;                // a_0 .. a_2
    std::size_t argmax = 0;                // maxsim
};

namespace detail {

template <typename T>
inline void require_token_dims(std::span<const T> q, const Matrix<T>& items) {
    if (items.rows == 0) throw ShapeError("interaction_score: no item tokens");
    if (q.size() != items.cols) {
        throw ShapeError("interaction_score: query token width " + std::to_string(q.size()) +
                         " != item token width " + std::to_string(items.cols));
    }
}

template <typename T>
inline std::vector<T> concat_query_items(std::span<const T> q, const Matrix<T>& items) {
    std::vector<T> out;
    out.reserve(q.size() + items.rows * items.cols);
    out.insert(out.end(), q.begin(), q.end());
    out.insert(out.end(), items.data.begin(), items.data.end());
    return out;
}

}  // namespace detail

// S_i for one quantized query token against all K_c item tokens.
template <typename T>
inline T interaction_score(std::span<const T> q, const Matrix<T>& items,
                           const InteractionParams<T>& p, ScorerTrace<T>* trace = nullptr) {
    detail::require_token_dims(q, items);
    check_interaction_shapes(p, items.cols, items.rows);
    switch (p.kind) {
        case InteractionKind::dot_product: {
            T s = T(0);
            for (std::size_t j = 0; j < items.rows; ++j) {
                s += dot(q, std::span<const T>(items.row(j)));
            }
            return s;
        }
        case InteractionKind::maxsim: {
            T best = dot(q, std::span<const T>(items.row(0)));
            std::size_t arg = 0;
            for (std::size_t j = 1; j < items.rows; ++j) {
                const T s = dot(q, std::span<const T>(items.row(j)));
                if (s > best) {
                    best = s;
                    arg = j;
                }
            }
            if (trace) trace->argmax = arg;
            return best;
        }
        case InteractionKind::dnn: {
            std::vector<T> x = detail::concat_query_items(q, items);
            if (trace) {
                trace->concat = x;
                return mlp_apply_trace(std::span<const T>(x), p.mlp, trace->mlp)[0];
            }
            return mlp_apply(std::span<const T>(x), p.mlp)[0];
        }
        case InteractionKind::inner_pdnn: {
            std::vector<T> x(items.rows * items.cols);
            for (std::size_t j = 0; j < items.rows; ++j) {
                auto t = items.row(j);
                for (std::size_t c = 0; c < items.cols; ++c) x[j * items.cols + c] = q[c] * t[c];
            }
            if (trace) {
                trace->concat = x;
                return mlp_apply_trace(std::span<const T>(x), p.mlp, trace->mlp)[0];
            }
            return mlp_apply(std::span<const T>(x), p.mlp)[0];
        }
        case InteractionKind::crossnet: {
            std::vector<T> x0 = detail::concat_query_items(q, items);
            std::vector<std::vector<T>> xs{x0};
            std::vector<T> as;
            std::vector<T> x = x0;
            for (const auto& layer : p.cross) {
                const T a = dot(std::span<const T>(layer.weight), std::span<const T>(x));
                std::vector<T> next(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    next[i] = x0[i] * a + layer.bias[i] + x[i];
                }
                as.push_back(a);
                x = std::move(next);
                xs.push_back(x);
            }
            const T s = dot(std::span<const T>(p.cross_out_w), std::span<const T>(x)) + p.cross_out_b;
            if (trace) {
                trace->cross_x = std::move(xs);
                trace->cross_a = std::move(as);
            }
            return s;
        }
    }
    throw ConfigError("interaction_score: unknown kind");
}

// Gradient mirror for everything except the bias (the bias enters through
// sparse_score, so its gradient is handled by the caller).
template <typename T>
inline InteractionParams<T> zeros_like(const InteractionParams<T>& p) {
    InteractionParams<T> z;
    z.kind = p.kind;
    z.mlp = zeros_like(p.mlp);
    for (const auto& layer : p.cross) {
        CrossLayer<T> c;
        c.weight.assign(layer.weight.size(), T(0));
        c.bias.assign(layer.bias.size(), T(0));
        z.cross.push_back(std::move(c));
    }
    z.cross_out_w.assign(p.cross_out_w.size(), T(0));
    z.cross_out_b = T(0);
    z.bias.assign(p.bias.size(), T(0));
    return z;
}

// Accumulates dS/dparams into `grads` and dS/d(item tokens) into `d_items`,
// both scaled by `upstream`. The query embedding gets no gradient (sg).
template <typename T>
inline void interaction_backward(const InteractionParams<T>& p, const ScorerTrace<T>& trace,
                                 std::span<const T> q, const Matrix<T>& items, T upstream,
                                 InteractionParams<T>& grads, Matrix<T>& d_items) {
    switch (p.kind) {
        case InteractionKind::dot_product: {
            for (std::size_t j = 0; j < items.rows; ++j) {
                auto dt = d_items.row(j);
                for (std::size_t c = 0; c < items.cols; ++c) dt[c] += upstream * q[c];
            }
            return;
        }
        case InteractionKind::maxsim: {
            auto dt = d_items.row(trace.argmax);
            for (std::size_t c = 0; c < items.cols; ++c) dt[c] += upstream * q[c];
            return;
        }
        case InteractionKind::dnn: {
            std::vector<T> up{upstream};
            std::vector<T> dx;
            mlp_backward(p.mlp, trace.mlp, std::span<const T>(up), grads.mlp, &dx);
            for (std::size_t j = 0; j < items.rows; ++j) {
                auto dt = d_items.row(j);
                const T* src = dx.data() + (j + 1) * items.cols;  // skip the q block
                for (std::size_t c = 0; c < items.cols; ++c) dt[c] += src[c];
            }
            return;
        }
        case InteractionKind::inner_pdnn: {
            std::vector<T> up{upstream};
            std::vector<T> dz;
            mlp_backward(p.mlp, trace.mlp, std::span<const T>(up), grads.mlp, &dz);
            for (std::size_t j = 0; j < items.rows; ++j) {
                auto dt = d_items.row(j);
                const T* src = dz.data() + j * items.cols;
                for (std::size_t c = 0; c < items.cols; ++c) dt[c] += src[c] * q[c];
            }
            return;
        }
        case InteractionKind::crossnet: {
            const auto& x0 = trace.cross_x[0];
            const std::size_t d = x0.size();
            std::vector<T> g(d);
            for (std::size_t i = 0; i < d; ++i) {
                grads.cross_out_w[i] += upstream * trace.cross_x[kCrossNetLayers][i];
                g[i] = upstream * p.cross_out_w[i];
            }
            grads.cross_out_b += upstream;
            std::vector<T> gx0(d, T(0));
            for (std::size_t l = kCrossNetLayers; l-- > 0;) {
                const auto& xl = trace.cross_x[l];
                const T a = trace.cross_a[l];
                T s = T(0);
                for (std::size_t i = 0; i < d; ++i) {
                    grads.cross[l].bias[i] += g[i];
                    s += g[i] * x0[i];
                    gx0[i] += g[i] * a;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    grads.cross[l].weight[i] += s * xl[i];
                    g[i] += s * p.cross[l].weight[i];
                }
            }
            for (std::size_t i = 0; i < d; ++i) gx0[i] += g[i];
            for (std::size_t j = 0; j < items.rows; ++j) {
                auto dt = d_items.row(j);
                const T* src = gx0.data() + (j + 1) * items.cols;  // skip the q block
                for (std::size_t c = 0; c < items.cols; ++c) dt[c] += src[c];
            }
            return;
        }
    }
}

// ReLU(S + bias); a zero result means the pair is not cached at serve time.
template <typename T>
inline T sparse_score(T s, T bias) {
    const T v = s + bias;
    return v > T(0) ? v : T(0);
}

// Final score = sum of the per-token sparse scores.
template <typename T>
inline T final_score(std::span<const T> sparse) {
    if (sparse.empty()) throw ShapeError("final_score: needs at least one token score");
    T total = T(0);
    for (const T v : sparse) {
        if (v < T(0)) {
            throw NumericError("final_score: negative sparse score violates contract");
        }
        total += v;
    }
    return total;
}

}  // namespace sparcode
