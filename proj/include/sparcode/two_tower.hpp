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

// Exact dot-product two-tower baseline: dual encoders, the item side
// precomputed into a dense matrix for serving.

#pragma once

#include <cstdint>
#include <vector>

#include "sparcode/adam.hpp"
#include "sparcode/embedding.hpp"
#include "sparcode/error.hpp"
#include "sparcode/mlp.hpp"
#include "sparcode/params.hpp"

namespace sparcode {

struct TwoTowerConfig {
    std::size_t embed_dim = 16;
    std::size_t out_dim = 16;
    std::size_t max_history = 20;
    std::vector<std::size_t> tokenizer_hidden;  // empty: single affine trunk
    bool tied_embeddings = true;   // query history shares the item table
    bool identity_init = true;     // square affine trunks start at identity
    std::size_t num_items = 0;

    void validate() const {
        if (num_items == 0) throw ConfigError("two_tower: num_items must be > 0");
        if (embed_dim == 0 || out_dim == 0) throw ConfigError("two_tower: zero width");
        if (max_history == 0) throw ConfigError("two_tower: max_history must be >= 1");
    }
};

template <typename T>
struct TwoTowerModel {
    TwoTowerConfig cfg;
    EmbeddingTable<T> history_table;  // empty when cfg.tied_embeddings
    EmbeddingTable<T> item_table;
    Mlp<T> query_trunk;   // D -> out_dim
    Mlp<T> item_trunk;    // D -> out_dim

    const EmbeddingTable<T>& history() const {
        return cfg.tied_embeddings ? item_table : history_table;
    }

    // Same windowing as the SparCode query side: keep the last max_history
    // ids, left-pad with the zero row to a fixed length.
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
                                  " out of range (corpus " + std::to_string(cfg.num_items) + ")");
            }
            rows[cfg.max_history - n + i] = id + 1;
        }
        return rows;
    }

    std::vector<T> query_vector(std::span<const std::uint32_t> history_ids,
                                MlpTrace<T>* trace = nullptr, std::vector<T>* pooled_out = nullptr,
                                double dropout = 0.0, Rng* rng = nullptr) const {
        const auto rows = history_rows(history_ids);
        Matrix<T> h = embed(std::span<const std::uint32_t>(rows), history());
        std::vector<T> pooled = mean_rows(h);
        if (pooled_out) *pooled_out = pooled;
        if (trace) return mlp_apply_trace(std::span<const T>(pooled), query_trunk, *trace, dropout, rng);
        return mlp_apply(std::span<const T>(pooled), query_trunk);
    }

    std::vector<T> item_vector(std::uint32_t item, MlpTrace<T>* trace = nullptr,
                               double dropout = 0.0, Rng* rng = nullptr) const {
        if (item >= cfg.num_items) {
            throw LookupError("item id " + std::to_string(item) + " out of range (corpus " +
                              std::to_string(cfg.num_items) + ")");
        }
        const std::uint32_t row = item + 1;
        Matrix<T> h = embed(std::span<const std::uint32_t>(&row, 1), item_table);
        std::vector<T> pooled = mean_rows(h);
        if (trace) return mlp_apply_trace(std::span<const T>(pooled), item_trunk, *trace, dropout, rng);
        return mlp_apply(std::span<const T>(pooled), item_trunk);
    }
};

template <typename T>
inline TwoTowerModel<T> make_two_tower(const TwoTowerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    TwoTowerModel<T> model;
    model.cfg = cfg;
    const std::size_t vocab = cfg.num_items + 1;
    if (!cfg.tied_embeddings) {
        model.history_table = make_embedding_table<T>("history", vocab, cfg.embed_dim, rng);
    } else {
        model.history_table.name = "history";
    }
    model.item_table = make_embedding_table<T>("item", vocab, cfg.embed_dim, rng);
    model.query_trunk =
        make_mlp<T>(cfg.embed_dim, cfg.tokenizer_hidden, cfg.out_dim, Activation::identity, rng);
    model.item_trunk =
        make_mlp<T>(cfg.embed_dim, cfg.tokenizer_hidden, cfg.out_dim, Activation::identity, rng);
    if (cfg.identity_init && cfg.tokenizer_hidden.empty() && cfg.embed_dim == cfg.out_dim) {
        for (auto* trunk : {&model.query_trunk, &model.item_trunk}) {
            auto& layer = trunk->layers.front();
            layer.weight.fill(T(0));
            for (std::size_t i = 0; i < cfg.embed_dim; ++i) layer.weight.at(i, i) = T(1);
        }
    }
    return model;
}

template <typename T>
inline TwoTowerModel<T> zeros_like(const TwoTowerModel<T>& m) {
    TwoTowerModel<T> z;
    z.cfg = m.cfg;
    z.history_table = m.history_table;
    z.history_table.rows.fill(T(0));
    z.item_table = m.item_table;
    z.item_table.rows.fill(T(0));
    z.query_trunk = zeros_like(m.query_trunk);
    z.item_trunk = zeros_like(m.item_trunk);
    return z;
}

template <typename T>
inline std::vector<ParamRef<T>> two_tower_parameters(TwoTowerModel<T>& m) {
    std::vector<ParamRef<T>> out;
    if (!m.cfg.tied_embeddings) {
        out.push_back({"embedding.history", m.history_table.rows.data.data(),
                       m.history_table.rows.data.size()});
    }
    out.push_back({"embedding.item", m.item_table.rows.data.data(), m.item_table.rows.data.size()});
    detail::collect_mlp_params<T>(m.query_trunk, "query_trunk", out);
    detail::collect_mlp_params<T>(m.item_trunk, "item_trunk", out);
    return out;
}

// The serving-side cache: one row per corpus item.
template <typename T>
inline Matrix<T> two_tower_item_matrix(const TwoTowerModel<T>& m) {
    Matrix<T> out(m.cfg.num_items, m.cfg.out_dim);
    for (std::uint32_t i = 0; i < m.cfg.num_items; ++i) {
        const auto v = m.item_vector(i);
        auto dst = out.row(i);
        for (std::size_t c = 0; c < v.size(); ++c) dst[c] = v[c];
    }
    return out;
}

}  // namespace sparcode
