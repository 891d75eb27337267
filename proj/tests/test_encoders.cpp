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

#include <doctest.h>

#include "sparcode/embedding.hpp"
#include "sparcode/gradcheck.hpp"
#include "sparcode/params.hpp"
#include "sparcode/tokenizer.hpp"

using namespace sparcode;

namespace {

Tokenizer<double> identity_tokenizer(std::size_t dim, std::size_t heads) {
    Tokenizer<double> tok;
    DenseLayer<double> layer;
    layer.weight = Matrix<double>(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) layer.weight.at(i, i) = 1.0;
    layer.bias.assign(dim, 0.0);
    layer.act = Activation::identity;
    tok.trunk.layers.push_back(layer);
    for (std::size_t h = 0; h < heads; ++h) tok.heads.push_back(layer);
    return tok;
}

}  // namespace

TEST_CASE("embed returns requested rows in order") {
    Rng rng(1);
    auto table = make_embedding_table<double>("item", 8, 4, rng);

    std::vector<std::uint32_t> one{3};
    auto m = embed(std::span<const std::uint32_t>(one), table);
    CHECK(m.rows == 1);
    for (std::size_t c = 0; c < 4; ++c) CHECK(m.at(0, c) == table.rows.at(3, c));

    std::vector<std::uint32_t> five{1, 4, 2, 7, 1};
    auto m5 = embed(std::span<const std::uint32_t>(five), table);
    CHECK(m5.rows == 5);
    CHECK(m5.cols == 4);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t c = 0; c < 4; ++c) CHECK(m5.at(i, c) == table.rows.at(five[i], c));
    }
}

TEST_CASE("embed of the padding id is the zero vector") {
    Rng rng(2);
    auto table = make_embedding_table<double>("item", 8, 4, rng);
    std::vector<std::uint32_t> pad{0};
    auto m = embed(std::span<const std::uint32_t>(pad), table);
    for (std::size_t c = 0; c < 4; ++c) CHECK(m.at(0, c) == 0.0);
}

TEST_CASE("embed out-of-range id names the table") {
    Rng rng(3);
    auto table = make_embedding_table<double>("history", 8, 4, rng);
    std::vector<std::uint32_t> bad{9};
    try {
        (void)embed(std::span<const std::uint32_t>(bad), table);
        FAIL("expected LookupError");
    } catch (const LookupError& e) {
        CHECK(std::string(e.what()).find("history") != std::string::npos);
    }
}

TEST_CASE("tokenize mean-pools then applies trunk and heads") {
    auto tok = identity_tokenizer(2, 1);
    Matrix<double> h(2, 2);
    h.at(0, 0) = 1.0;
    h.at(0, 1) = 1.0;
    h.at(1, 0) = 3.0;
    h.at(1, 1) = 3.0;
    TokenizerTrace<double> trace;
    auto tokens = tokenize(h, tok, &trace);
    CHECK(trace.pooled == std::vector<double>{2.0, 2.0});
    CHECK(tokens.rows == 1);
    CHECK(tokens.at(0, 0) == doctest::Approx(2.0));
    CHECK(tokens.at(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("two heads give a 2 x D_T matrix, differing when heads differ") {
    Rng rng(4);
    auto tok = make_tokenizer<double>(3, {}, 5, 2, rng);
    Matrix<double> h(1, 3);
    h.at(0, 0) = 0.4;
    h.at(0, 1) = -1.0;
    h.at(0, 2) = 0.9;
    auto tokens = tokenize(h, tok);
    CHECK(tokens.rows == 2);
    CHECK(tokens.cols == 5);
    bool differ = false;
    for (std::size_t c = 0; c < 5; ++c) {
        if (tokens.at(0, c) != tokens.at(1, c)) differ = true;
    }
    CHECK(differ);
}

TEST_CASE("tokenize rejects empty input") {
    auto tok = identity_tokenizer(2, 1);
    Matrix<double> empty(0, 2);
    CHECK_THROWS_AS((void)tokenize(empty, tok), DataError);
}

TEST_CASE("item tokenization is deterministic for identical features") {
    Rng rng(5);
    auto tok = make_tokenizer<double>(4, {6}, 4, 4, rng);
    Matrix<double> h(1, 4);
    for (std::size_t c = 0; c < 4; ++c) h.at(0, c) = 0.25 * static_cast<double>(c + 1);
    auto a = tokenize(h, tok);
    auto b = tokenize(h, tok);
    CHECK(a.data == b.data);
    CHECK(a.rows == 4);
}

TEST_CASE("gradients flow into heads, trunk, and embedding rows") {
    // Two-layer toy config: loss = sum_i <w_i, token_i> over the tokens of a
    // 3-row embedded history; finite differences confirm the whole chain.
    Rng rng(6);
    auto table = make_embedding_table<double>("history", 6, 3, rng);
    auto tok = make_tokenizer<double>(3, {4}, 3, 2, rng);
    std::vector<std::uint32_t> ids{2, 5, 2};
    Matrix<double> w(2, 3);
    for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);

    auto forward = [&]() {
        auto h = embed(std::span<const std::uint32_t>(ids), table);
        auto tokens = tokenize(h, tok);
        double loss = 0.0;
        for (std::size_t i = 0; i < tokens.rows; ++i) {
            loss += dot(std::span<const double>(w.row(i)), std::span<const double>(tokens.row(i)));
        }
        return loss;
    };

    // Analytic gradients.
    auto h = embed(std::span<const std::uint32_t>(ids), table);
    TokenizerTrace<double> trace;
    (void)tokenize(h, tok, &trace);
    auto grads = zeros_like(tok);
    auto row_grad = tokenize_backward(tok, trace, w, grads);
    Matrix<double> table_grad(table.rows.rows, table.rows.cols);
    for (const std::uint32_t id : ids) {
        axpy(1.0, std::span<const double>(row_grad.data(), row_grad.size()), table_grad.row(id));
    }

    std::vector<ParamRef<double>> refs;
    detail::collect_tokenizer_params<double>(tok, "tok", refs);
    refs.push_back({"table", table.rows.data.data(), table.rows.data.size()});
    std::vector<ParamRef<double>> grefs;
    detail::collect_tokenizer_params<double>(grads, "tok", grefs);
    grefs.push_back({"table", table_grad.data.data(), table_grad.data.size()});

    std::vector<double> x0;
    for (const auto& p : refs) x0.insert(x0.end(), p.data, p.data + p.size);
    auto f = [&](std::span<const double> theta) {
        std::size_t off = 0;
        for (auto& p : refs) {
            for (std::size_t i = 0; i < p.size; ++i) p.data[i] = theta[off + i];
            off += p.size;
        }
        return forward();
    };
    const auto fd = finite_difference_gradient(f, x0, 1e-5);
    std::size_t off = 0;
    for (const auto& g : grefs) {
        for (std::size_t i = 0; i < g.size; ++i) {
            CHECK(relative_error(g.data[i], fd[off + i]) < 1e-4);
        }
        off += g.size;
    }
    // The trunk actually received gradient.
    double trunk_norm = 0.0;
    for (const auto& v : grads.trunk.layers[0].weight.data) trunk_norm += std::fabs(v);
    CHECK(trunk_norm > 0.0);
}
