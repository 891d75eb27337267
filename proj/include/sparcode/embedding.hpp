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

#include <cstdint>
#include <string>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/matrix.hpp"
#include "sparcode/rng.hpp"

namespace sparcode {

// Embedding table. Row 0 is the padding vector: it is initialized to zero
// and, when frozen_pad is set, receives no gradient, so it stays exactly
// zero for the lifetime of the model.
template <typename T>
struct EmbeddingTable {
    std::string name;
    Matrix<T> rows;
    bool frozen_pad = true;

    std::size_t vocab_size() const { return rows.rows; }
    std::size_t dim() const { return rows.cols; }
};

template <typename T>
inline EmbeddingTable<T> make_embedding_table(std::string name, std::size_t vocab, std::size_t dim,
                                              Rng& rng) {
    EmbeddingTable<T> table;
    table.name = std::move(name);
    table.rows = Matrix<T>(vocab, dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t r = 1; r < vocab; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            table.rows.at(r, c) = static_cast<T>(rng.uniform(-bound, bound));
        }
    }
    return table;
}

// One output row per id, in input order.
template <typename T>
inline Matrix<T> embed(std::span<const std::uint32_t> ids, const EmbeddingTable<T>& table) {
    Matrix<T> out(ids.size(), table.dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= table.vocab_size()) {
            throw LookupError("embed: id " + std::to_string(ids[i]) +
                              " out of range for table '" + table.name + "' (vocab " +
                              std::to_string(table.vocab_size()) + ")");
        }
        auto src = table.rows.row(ids[i]);
        auto dst = out.row(i);
        for (std::size_t c = 0; c < table.dim(); ++c) dst[c] = src[c];
    }
    return out;
}

}  // namespace sparcode
