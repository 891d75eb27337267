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

// The full SparCode model: embedding tables, query/item tokenizers, the
// product quantizer, and the interaction scorer. Dataset item ids map to
// embedding rows with a +1 offset so row 0 stays the padding vector.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparcode/adam.hpp"
#include "sparcode/embedding.hpp"
#include "sparcode/error.hpp"
#include "sparcode/params.hpp"
#include "sparcode/quantizer.hpp"
#include "sparcode/scorer.hpp"
#include "sparcode/tokenizer.hpp"

namespace sparcode {

struct ModelConfig {
    std::size_t embed_dim = 16;                       // D
    std::size_t token_dim = 16;                       // D_T
    std::size_t query_tokens = 2;                     // K_u
    std::size_t item_tokens = 2;                      // K_c
    std::size_t num_books = 2;                        // M
    std::size_t num_words = 256;                      // N
    double gamma = 0.99;
    std::size_t max_history = 20;
    InteractionKind kind = InteractionKind::inner_pdnn;
    std::vector<std::size_t> scorer_hidden{256, 256, 256};
    std::vector<std::size_t> tokenizer_hidden;  // empty: single affine trunk
    bool per_token_bias = false;
    bool tied_embeddings = true;   // query history shares the item table
    bool identity_init = true;     // square tokenizer maps start at identity
    double head_jitter = 0.5;      // per-head deviation from identity (x 1/sqrt(D))
    std::size_t num_items = 0;

    void validate() const {
        if (num_items == 0) throw ConfigError("model: num_items must be > 0");
        if (embed_dim == 0 || token_dim == 0) throw ConfigError("model: zero embedding width");
        if (query_tokens == 0 || item_tokens == 0) throw ConfigError("model: token counts must be >= 1");
        if (num_books == 0 || num_words == 0) throw ConfigError("model: M and N must be >= 1");
        if (token_dim % num_books != 0) {
            throw ConfigError("model: D_T (" + std::to_string(token_dim) +
                              ") must be divisible by M (" + std::to_string(num_books) + ")");
        }
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("model: gamma must be in (0,1)");
        if (max_history == 0) throw ConfigError("model: max_history must be >= 1");
    }
};

template <typename T>
struct SparCodeModel {
    ModelConfig cfg;
    EmbeddingTable<T> history_table;  // empty when cfg.tied_embeddings
    EmbeddingTable<T> item_table;
    Tokenizer<T> query_tokenizer;
    Tokenizer<T> item_tokenizer;
    Codebooks<T> codebooks;
    InteractionParams<T> scorer;

    const EmbeddingTable<T>& history() const {
        return cfg.tied_embeddings ? item_table : history_table;
    }

    // Callers pass time order; the last max_history ids are kept and the
    // window is left-padded with the pad row (id 0) to a fixed length, so the
    // mean pool has a length-independent denominator.
    std::vector<std::uint32_t> history_rows(std::span<const std::uint32_t> history_ids) const {
        if (history_ids.empty()) throw DataError("query: empty history");
        const std::size_t start =
            history_ids.size() > cfg.max_history ? history_ids.size() - cfg.max_history : 0;
        std::vector<std::uint32_t> rows(cfg.max_history, 0);
        const std::size_t n = history_ids.size() - start;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t id = history_ids[start + i];
            if (id >= cfg.num_items) {
                throw LookupError("query: history item id " + std::to_string(id) +
                                  " out of range for table '" + history().name + "' (corpus " +
                                  std::to_string(cfg.num_items) + ")");
            }
            rows[cfg.max_history - n + i] = id + 1;
        }
        return rows;
    }

    Matrix<T> query_token_matrix(std::span<const std::uint32_t> history_ids,
                                 TokenizerTrace<T>* trace = nullptr, double dropout = 0.0,
                                 Rng* rng = nullptr) const {
        const auto rows = history_rows(history_ids);
        Matrix<T> h = embed(std::span<const std::uint32_t>(rows), history());
        return tokenize(h, query_tokenizer, trace, dropout, rng);
    }

    Matrix<T> item_token_matrix(std::uint32_t item, TokenizerTrace<T>* trace = nullptr,
                                double dropout = 0.0, Rng* rng = nullptr) const {
        if (item >= cfg.num_items) {
            throw LookupError("item id " + std::to_string(item) + " out of range for table '" +
                              item_table.name + "' (corpus " + std::to_string(cfg.num_items) + ")");
        }
        const std::uint32_t row = item + 1;
        Matrix<T> h = embed(std::span<const std::uint32_t>(&row, 1), item_table);
        return tokenize(h, item_tokenizer, trace, dropout, rng);
    }

    std::vector<QuantizedToken<T>> quantize_tokens(const Matrix<T>& tokens) const {
        std::vector<QuantizedToken<T>> out;
        out.reserve(tokens.rows);
        for (std::size_t i = 0; i < tokens.rows; ++i) {
            out.push_back(quantize(std::span<const T>(tokens.row(i)), codebooks));
        }
        return out;
    }

    T train_bias(std::size_t token_index) const {
        return scorer.bias.size() == 1 ? scorer.bias[0] : scorer.bias[token_index];
    }
};

template <typename T>
inline SparCodeModel<T> make_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    SparCodeModel<T> model;
    model.cfg = cfg;
    const std::size_t vocab = cfg.num_items + 1;
    if (!cfg.tied_embeddings) {
        model.history_table = make_embedding_table<T>("history", vocab, cfg.embed_dim, rng);
    } else {
        model.history_table.name = "history";
    }
    model.item_table = make_embedding_table<T>("item", vocab, cfg.embed_dim, rng);
    model.query_tokenizer = make_tokenizer<T>(cfg.embed_dim, cfg.tokenizer_hidden, cfg.token_dim,
                                              cfg.query_tokens, rng, cfg.identity_init,
                                              cfg.head_jitter);
    model.item_tokenizer = make_tokenizer<T>(cfg.embed_dim, cfg.tokenizer_hidden, cfg.token_dim,
                                             cfg.item_tokens, rng, cfg.identity_init,
                                             cfg.head_jitter);
    model.codebooks = make_codebooks<T>(cfg.num_books, cfg.num_words,
                                        cfg.token_dim / cfg.num_books, static_cast<T>(cfg.gamma), rng);
    model.scorer = make_interaction_params<T>(cfg.kind, cfg.token_dim, cfg.item_tokens,
                                              cfg.scorer_hidden, cfg.per_token_bias,
                                              cfg.query_tokens, rng);
    return model;
}

// Gradient mirror: same shapes, all zero. Codebooks are carried for shape
// symmetry but never receive gradients.
template <typename T>
inline SparCodeModel<T> zeros_like(const SparCodeModel<T>& m) {
    SparCodeModel<T> z;
    z.cfg = m.cfg;
    z.history_table = m.history_table;
    z.history_table.rows.fill(T(0));
    z.item_table = m.item_table;
    z.item_table.rows.fill(T(0));
    z.query_tokenizer = zeros_like(m.query_tokenizer);
    z.item_tokenizer = zeros_like(m.item_tokenizer);
    z.codebooks = m.codebooks;
    for (auto& w : z.codebooks.words) w.fill(T(0));
    for (auto& a : z.codebooks.accum) a.fill(T(0));
    z.codebooks.counts.fill(T(0));
    z.scorer = zeros_like(m.scorer);
    return z;
}

// Adam-managed parameters. Codebooks are deliberately absent: they are
// updated by EMA only.
template <typename T>
inline std::vector<ParamRef<T>> model_parameters(SparCodeModel<T>& m) {
    std::vector<ParamRef<T>> out;
    if (!m.cfg.tied_embeddings) {
        out.push_back({"embedding.history", m.history_table.rows.data.data(),
                       m.history_table.rows.data.size()});
    }
    out.push_back({"embedding.item", m.item_table.rows.data.data(), m.item_table.rows.data.size()});
    detail::collect_tokenizer_params<T>(m.query_tokenizer, "tokenizer.query", out);
    detail::collect_tokenizer_params<T>(m.item_tokenizer, "tokenizer.item", out);
    switch (m.scorer.kind) {
        case InteractionKind::dot_product:
        case InteractionKind::maxsim:
            break;
        case InteractionKind::dnn:
        case InteractionKind::inner_pdnn:
            detail::collect_mlp_params<T>(m.scorer.mlp, "scorer.mlp", out);
            break;
        case InteractionKind::crossnet:
            for (std::size_t l = 0; l < m.scorer.cross.size(); ++l) {
                out.push_back({"scorer.cross" + std::to_string(l) + ".weight",
                               m.scorer.cross[l].weight.data(), m.scorer.cross[l].weight.size()});
                out.push_back({"scorer.cross" + std::to_string(l) + ".bias",
                               m.scorer.cross[l].bias.data(), m.scorer.cross[l].bias.size()});
            }
            out.push_back({"scorer.cross_out.weight", m.scorer.cross_out_w.data(),
                           m.scorer.cross_out_w.size()});
            out.push_back({"scorer.cross_out.bias", &m.scorer.cross_out_b, 1});
            break;
    }
    out.push_back({"scorer.bias_b", m.scorer.bias.data(), m.scorer.bias.size()});
    return out;
}

template <typename T>
inline std::vector<ParamRef<const T>> model_parameters_const(SparCodeModel<T>& m) {
    std::vector<ParamRef<const T>> out;
    for (auto& p : model_parameters(m)) out.push_back({p.name, p.data, p.size});
    return out;
}

}  // namespace sparcode
