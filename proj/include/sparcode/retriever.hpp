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

// Online retrieval: query -> K_u codes -> hash-accumulate the addressed
// posting lists -> bounded-heap top-k. The exhaustive oracle mirrors the
// model scoring directly and must agree with the index path exactly on a
// full-grid index (same summation order, same tie-break).

#pragma once

#include <cstdint>
#include <queue>
#include <unordered_map>
#include <vector>

#include "sparcode/indexer.hpp"
#include "sparcode/model.hpp"
#include "sparcode/two_tower.hpp"

namespace sparcode {

template <typename T>
struct Ranked {
    std::uint32_t item = 0;
    T score = T(0);

    bool operator==(const Ranked&) const = default;
};

template <typename T>
struct RankedList {
    std::vector<Ranked<T>> entries;  // score desc, ties by item asc
    std::size_t k = 0;
};

// Instrumentation for the latency contract: retrieval may only touch the
// addressed posting lists, never the corpus.
struct RetrievalStats {
    std::size_t postings_addressed = 0;
    std::size_t entries_scanned = 0;
};

namespace detail {

template <typename T>
inline bool rank_before(const Ranked<T>& a, const Ranked<T>& b) {
    return a.score > b.score || (a.score == b.score && a.item < b.item);
}

// Bounded selection: keeps the k best under (-score, item id).
template <typename T>
class TopK {
  public:
    explicit TopK(std::size_t k) : k_(k) {}

    void offer(const Ranked<T>& r) {
        if (heap_.size() < k_) {
            heap_.push(r);
        } else if (rank_before(r, heap_.top())) {
            heap_.pop();
            heap_.push(r);
        }
    }

    RankedList<T> finish() {
        RankedList<T> out;
        out.k = k_;
        out.entries.resize(heap_.size());
        for (std::size_t i = heap_.size(); i-- > 0;) {
            out.entries[i] = heap_.top();
            heap_.pop();
        }
        return out;
    }

  private:
    struct WorseLast {
        bool operator()(const Ranked<T>& a, const Ranked<T>& b) const { return rank_before(a, b); }
    };
    std::size_t k_;
    std::priority_queue<Ranked<T>, std::vector<Ranked<T>>, WorseLast> heap_;
};

}  // namespace detail

// embed -> tokenize -> quantize each of the K_u tokens. Duplicate codes are
// kept; their posting scores sum in retrieval.
template <typename T>
inline std::vector<Code> query_to_codes(const SparCodeModel<T>& model,
                                        std::span<const std::uint32_t> history) {
    const Matrix<T> tokens = model.query_token_matrix(history);
    std::vector<Code> codes;
    codes.reserve(tokens.rows);
    for (std::size_t i = 0; i < tokens.rows; ++i) {
        codes.push_back(quantize(std::span<const T>(tokens.row(i)), model.codebooks).code);
    }
    return codes;
}

// Union of the addressed posting lists; per item the final score is the sum
// of its cached scores across code occurrences (absent lists contribute 0).
// A code with no posting list is not an error.
template <typename T>
inline RankedList<T> retrieve_topk(const std::vector<Code>& codes,
                                   const SparseInvertedIndex<T>& index, std::size_t k,
                                   RetrievalStats* stats = nullptr) {
    if (k == 0) throw ConfigError("retrieve_topk: k must be >= 1");
    std::unordered_map<std::uint32_t, T> acc;
    for (const auto& code : codes) {
        if (stats) ++stats->postings_addressed;
        const PostingList<T>* list = index.find(code);
        if (!list) continue;
        for (const auto& entry : list->entries) {
            if (stats) ++stats->entries_scanned;
            acc[entry.item] += entry.score;
        }
    }
    detail::TopK<T> top(k);
    for (const auto& [item, score] : acc) top.offer({item, score});
    return top.finish();
}

// Full-model scoring of every corpus item under the serve bias; only items
// with a positive final score are rankable, mirroring the index path.
template <typename T>
inline RankedList<T> exhaustive_topk(const SparCodeModel<T>& model,
                                     std::span<const std::uint32_t> history, std::size_t k,
                                     T serve_bias) {
    if (k == 0) throw ConfigError("exhaustive_topk: k must be >= 1");
    const Matrix<T> tokens = model.query_token_matrix(history);
    const auto quant = model.quantize_tokens(tokens);
    detail::TopK<T> top(k);
    for (std::uint32_t item = 0; item < model.cfg.num_items; ++item) {
        const Matrix<T> item_tokens = model.item_token_matrix(item);
        T final = T(0);
        for (const auto& q : quant) {
            const T s = interaction_score(std::span<const T>(q.embedding), item_tokens, model.scorer);
            final += sparse_score(s, serve_bias);
        }
        if (final > T(0)) top.offer({item, final});
    }
    return top.finish();
}

// Exact dot-product baseline over the cached item matrix.
template <typename T>
inline RankedList<T> twotower_topk(std::span<const T> query, const Matrix<T>& item_matrix,
                                   std::size_t k) {
    if (k == 0) throw ConfigError("twotower_topk: k must be >= 1");
    if (query.size() != item_matrix.cols) {
        throw ShapeError("twotower_topk: query width " + std::to_string(query.size()) +
                         " != item embedding width " + std::to_string(item_matrix.cols));
    }
    detail::TopK<T> top(k);
    for (std::uint32_t item = 0; item < item_matrix.rows; ++item) {
        top.offer({item, dot(query, std::span<const T>(item_matrix.row(item)))});
    }
    return top.finish();
}

}  // namespace sparcode
