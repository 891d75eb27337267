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

// Product quantizer: a token of width D_T is split into M contiguous
// sub-vectors, each replaced by its nearest codeword (squared Euclidean,
// ties to the lowest index). Codewords are never touched by backprop; they
// move only through the EMA recurrence over assignment counts and sums, and
// the invariant codeword == accumulator / count holds after every update.

#pragma once

#include <cstdint>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/matrix.hpp"
#include "sparcode/rng.hpp"

namespace sparcode {

// M-tuple of codeword indices; the inverted-index key.
using Code = std::vector<std::uint32_t>;

inline bool code_less(const Code& a, const Code& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

template <typename T>
struct Codebooks {
    std::size_t num_books = 0;   // M
    std::size_t num_words = 0;   // N
    std::size_t sub_dim = 0;     // D_T / M
    T gamma = T(0.99);
    std::vector<Matrix<T>> words;   // M matrices, N x sub_dim
    Matrix<T> counts;               // M x N, strictly positive
    std::vector<Matrix<T>> accum;   // M matrices, N x sub_dim

    std::size_t dim() const { return num_books * sub_dim; }
};

template <typename T>
struct QuantizedToken {
    Code code;
    std::vector<T> embedding;   // concatenation of the selected codewords
    std::vector<T> original;    // the token that was quantized
};

// Random init; counts start at 1 and accumulators at the codeword so the
// ratio invariant holds from the first step.
template <typename T>
inline Codebooks<T> make_codebooks(std::size_t m, std::size_t n, std::size_t sub_dim, T gamma,
                                   Rng& rng) {
    if (m == 0 || n == 0 || sub_dim == 0) throw ConfigError("make_codebooks: zero dimension");
    if (!(gamma > T(0) && gamma < T(1))) throw ConfigError("make_codebooks: gamma must be in (0,1)");
    Codebooks<T> cb;
    cb.num_books = m;
    cb.num_words = n;
    cb.sub_dim = sub_dim;
    cb.gamma = gamma;
    cb.counts = Matrix<T>(m, n);
    cb.counts.fill(T(1));
    const double bound = 1.0 / std::sqrt(static_cast<double>(sub_dim));
    for (std::size_t b = 0; b < m; ++b) {
        Matrix<T> w(n, sub_dim);
        for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
        cb.accum.push_back(w);
        cb.words.push_back(std::move(w));
    }
    return cb;
}

// Data-dependent reinit: codeword k of book m is the k-th sampled token
// sub-vector (cycling through the sample with a small jitter when the
// sample is smaller than N, so no two codewords start identical).
template <typename T>
inline void reinit_from_samples(Codebooks<T>& cb, const std::vector<std::vector<T>>& tokens,
                                Rng& rng) {
    if (tokens.empty()) throw DataError("reinit_from_samples: no sample tokens");
    for (std::size_t b = 0; b < cb.num_books; ++b) {
        for (std::size_t k = 0; k < cb.num_words; ++k) {
            const auto& tok = tokens[k % tokens.size()];
            if (tok.size() != cb.dim()) throw ShapeError("reinit_from_samples: token width mismatch");
            const T* sub = tok.data() + b * cb.sub_dim;
            auto dst = cb.words[b].row(k);
            const bool jitter = k >= tokens.size();
            for (std::size_t c = 0; c < cb.sub_dim; ++c) {
                dst[c] = sub[c];
                if (jitter) dst[c] += static_cast<T>(rng.normal() * 1e-3);
            }
            auto acc = cb.accum[b].row(k);
            for (std::size_t c = 0; c < cb.sub_dim; ++c) acc[c] = dst[c];
            cb.counts.at(b, k) = T(1);
        }
    }
}

template <typename T>
inline std::uint32_t nearest_codeword(const Codebooks<T>& cb, std::size_t book,
                                      std::span<const T> sub) {
    std::uint32_t best = 0;
    T best_dist = squared_distance(std::span<const T>(cb.words[book].row(0)), sub);
    for (std::uint32_t k = 1; k < cb.num_words; ++k) {
        const T d = squared_distance(std::span<const T>(cb.words[book].row(k)), sub);
        if (d < best_dist) {
            best_dist = d;
            best = k;
        }
    }
    return best;
}

template <typename T>
inline QuantizedToken<T> quantize(std::span<const T> token, const Codebooks<T>& cb) {
    if (token.size() != cb.dim()) {
        throw ShapeError("quantize: token length " + std::to_string(token.size()) +
                         " != codebook dim " + std::to_string(cb.dim()));
    }
    QuantizedToken<T> out;
    out.original.assign(token.begin(), token.end());
    out.code.resize(cb.num_books);
    out.embedding.resize(cb.dim());
    for (std::size_t b = 0; b < cb.num_books; ++b) {
        auto sub = token.subspan(b * cb.sub_dim, cb.sub_dim);
        const std::uint32_t k = nearest_codeword(cb, b, sub);
        out.code[b] = k;
        auto word = cb.words[b].row(k);
        for (std::size_t c = 0; c < cb.sub_dim; ++c) out.embedding[b * cb.sub_dim + c] = word[c];
    }
    return out;
}

// Concatenated codeword embedding for an arbitrary code.
template <typename T>
inline std::vector<T> code_embedding(const Codebooks<T>& cb, const Code& code) {
    if (code.size() != cb.num_books) throw ShapeError("code_embedding: code length mismatch");
    std::vector<T> out(cb.dim());
    for (std::size_t b = 0; b < cb.num_books; ++b) {
        if (code[b] >= cb.num_words) throw LookupError("code_embedding: codeword index out of range");
        auto word = cb.words[b].row(code[b]);
        for (std::size_t c = 0; c < cb.sub_dim; ++c) out[b * cb.sub_dim + c] = word[c];
    }
    return out;
}

// Sum over tokens of ||T_i - sg[T~_i]||^2 (the per-sub-vector sum equals the
// full-vector norm). Gradient flows only to the original tokens.
template <typename T>
inline T commitment_loss(const Matrix<T>& tokens, const std::vector<QuantizedToken<T>>& quantized) {
    if (tokens.rows != quantized.size()) throw ShapeError("commitment_loss: list length mismatch");
    T total = T(0);
    for (std::size_t i = 0; i < quantized.size(); ++i) {
        total += squared_distance(std::span<const T>(tokens.row(i)),
                                  std::span<const T>(quantized[i].embedding));
    }
    return total;
}

// Per-batch assignment statistics: raw counts and raw sums of the original
// sub-vectors routed to each codeword.
template <typename T>
struct BatchAssignments {
    Matrix<T> counts;               // M x N
    std::vector<Matrix<T>> sums;    // M matrices, N x sub_dim
};

template <typename T>
inline BatchAssignments<T> make_assignments(const Codebooks<T>& cb) {
    BatchAssignments<T> a;
    a.counts = Matrix<T>(cb.num_books, cb.num_words);
    for (std::size_t b = 0; b < cb.num_books; ++b) {
        a.sums.emplace_back(cb.num_words, cb.sub_dim);
    }
    return a;
}

template <typename T>
inline void record_assignment(BatchAssignments<T>& a, const Codebooks<T>& cb,
                              const QuantizedToken<T>& q) {
    for (std::size_t b = 0; b < cb.num_books; ++b) {
        const std::uint32_t k = q.code[b];
        a.counts.at(b, k) += T(1);
        auto dst = a.sums[b].row(k);
        const T* sub = q.original.data() + b * cb.sub_dim;
        for (std::size_t c = 0; c < cb.sub_dim; ++c) dst[c] += sub[c];
    }
}

// EMA recurrence: count <- count*g + n*(1-g); accum <- accum*g + sum*(1-g);
// codeword <- accum / count. Unassigned codewords decay both sides, which
// leaves the ratio unchanged.
template <typename T>
inline void ema_update(Codebooks<T>& cb, const BatchAssignments<T>& a) {
    const T g = cb.gamma;
    for (std::size_t b = 0; b < cb.num_books; ++b) {
        for (std::size_t k = 0; k < cb.num_words; ++k) {
            T& count = cb.counts.at(b, k);
            count = count * g + a.counts.at(b, k) * (T(1) - g);
            if (!(count > T(0))) {
                throw NumericError("ema_update: count for codeword (" + std::to_string(b) + "," +
                                   std::to_string(k) + ") is not positive");
            }
            auto acc = cb.accum[b].row(k);
            auto sum = a.sums[b].row(k);
            auto word = cb.words[b].row(k);
            for (std::size_t c = 0; c < cb.sub_dim; ++c) {
                acc[c] = acc[c] * g + sum[c] * (T(1) - g);
                word[c] = acc[c] / count;
            }
        }
    }
}

}  // namespace sparcode
