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

#include <set>

#include "sparcode/quantizer.hpp"
#include "sparcode/selfcheck.hpp"

using namespace sparcode;

namespace {

Codebooks<double> fixed_codebooks(std::size_t m, std::size_t n, std::size_t sub,
                                  const std::vector<std::vector<double>>& words_per_book) {
    Rng rng(99);
    auto cb = make_codebooks<double>(m, n, sub, 0.5, rng);
    for (std::size_t b = 0; b < m; ++b) {
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t c = 0; c < sub; ++c) {
                cb.words[b].at(k, c) = words_per_book[b][k * sub + c];
                cb.accum[b].at(k, c) = cb.words[b].at(k, c);
            }
            cb.counts.at(b, k) = 1.0;
        }
    }
    return cb;
}

}  // namespace

TEST_CASE("quantize selects the nearest codeword by L2") {
    auto cb = fixed_codebooks(1, 2, 2, {{0.0, 0.0, 1.0, 1.0}});
    std::vector<double> token{0.9, 0.8};
    auto q = quantize(std::span<const double>(token), cb);
    CHECK(q.code == Code{1});
    CHECK(q.embedding == std::vector<double>{1.0, 1.0});
    CHECK(q.original == token);
}

TEST_CASE("quantize is idempotent on an exact codeword") {
    auto cb = fixed_codebooks(1, 3, 2, {{0.0, 0.0, 0.5, -0.5, 2.0, 2.0}});
    std::vector<double> token{0.5, -0.5};
    auto q = quantize(std::span<const double>(token), cb);
    CHECK(q.code == Code{1});
    CHECK(q.embedding == token);
}

TEST_CASE("quantize splits into per-book halves") {
    auto cb = fixed_codebooks(2, 2, 1, {{1.0, 0.0}, {0.0, 1.0}});
    std::vector<double> token{0.9, 0.1};
    auto q = quantize(std::span<const double>(token), cb);
    CHECK(q.code == Code{0, 0});
    CHECK(q.embedding == std::vector<double>{1.0, 0.0});
}

TEST_CASE("quantize ties break to the lowest codeword index") {
    auto cb = fixed_codebooks(1, 3, 2, {{1.0, 1.0, 1.0, 1.0, 0.0, 0.0}});
    std::vector<double> token{1.0, 1.0};
    auto q = quantize(std::span<const double>(token), cb);
    CHECK(q.code == Code{0});
}

TEST_CASE("quantize rejects a token of the wrong width") {
    auto cb = fixed_codebooks(1, 2, 2, {{0.0, 0.0, 1.0, 1.0}});
    std::vector<double> token{1.0, 2.0, 3.0};
    CHECK_THROWS_AS((void)quantize(std::span<const double>(token), cb), ShapeError);
}

TEST_CASE("commitment loss matches the squared distance definition") {
    auto cb = fixed_codebooks(1, 2, 2, {{0.0, 0.0, 1.0, 1.0}});

    Matrix<double> tokens(1, 2);
    tokens.at(0, 0) = 1.0;
    tokens.at(0, 1) = 1.0;
    std::vector<QuantizedToken<double>> q{quantize(std::span<const double>(tokens.row(0)), cb)};
    CHECK(commitment_loss(tokens, q) == doctest::Approx(0.0));

    std::vector<QuantizedToken<double>> forced{{Code{0}, {0.0, 0.0}, {1.0, 1.0}}};
    CHECK(commitment_loss(tokens, forced) == doctest::Approx(2.0));

    Matrix<double> one(1, 1);
    one.at(0, 0) = 1.0;
    std::vector<QuantizedToken<double>> forced2{{Code{0}, {3.0}, {1.0}}};
    CHECK(commitment_loss(one, forced2) == doctest::Approx(4.0));
}

TEST_CASE("ema hand recurrence: gamma=0.5, two assigned sub-vectors") {
    auto cb = fixed_codebooks(1, 1, 1, {{0.0}});
    auto assign = make_assignments(cb);
    assign.counts.at(0, 0) = 2.0;
    assign.sums[0].at(0, 0) = 4.0;  // assigned {[1],[3]}
    ema_update(cb, assign);
    CHECK(cb.counts.at(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(cb.accum[0].at(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(cb.words[0].at(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("ema with no assignments keeps the codeword value") {
    Rng rng(3);
    auto cb = make_codebooks<double>(1, 2, 3, 0.99, rng);
    const auto before = cb.words[0].data;
    auto assign = make_assignments(cb);
    ema_update(cb, assign);
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(cb.words[0].data[i] == doctest::Approx(before[i]).epsilon(1e-12));
    }
}

TEST_CASE("ema in the gamma->0 limit replaces the codeword with the batch mean") {
    auto cb = fixed_codebooks(1, 1, 1, {{10.0}});
    cb.gamma = 1e-12;
    auto assign = make_assignments(cb);
    assign.counts.at(0, 0) = 4.0;
    assign.sums[0].at(0, 0) = 6.0;  // mean 1.5
    ema_update(cb, assign);
    CHECK(cb.words[0].at(0, 0) == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("codeword equals accumulator over count exactly after updates") {
    Rng rng(8);
    auto cb = make_codebooks<double>(2, 4, 3, 0.9, rng);
    for (int round = 0; round < 7; ++round) {
        auto assign = make_assignments(cb);
        for (int a = 0; a < 5; ++a) {
            std::vector<double> token(cb.dim());
            for (auto& v : token) v = rng.normal();
            record_assignment(assign, cb, quantize(std::span<const double>(token), cb));
        }
        ema_update(cb, assign);
        for (std::size_t b = 0; b < cb.num_books; ++b) {
            for (std::size_t k = 0; k < cb.num_words; ++k) {
                for (std::size_t c = 0; c < cb.sub_dim; ++c) {
                    CHECK(cb.words[b].at(k, c) == cb.accum[b].at(k, c) / cb.counts.at(b, k));
                }
            }
        }
    }
}

TEST_CASE("quantizer suite: idempotence and code cardinality") {
    const auto r = selfcheck::quantizer_suite(200, 1234);
    CHECK(r.idempotent);
    CHECK(r.cardinality_ok);
    CHECK(r.ratio_invariant_ok);
    CHECK(r.ema_example_ok);
    CHECK(r.distinct_codes <= 16);
}

TEST_CASE("with one codebook there are at most N distinct embeddings") {
    Rng rng(21);
    auto cb = make_codebooks<double>(1, 4, 3, 0.9, rng);
    std::set<std::vector<double>> embeddings;
    for (int t = 0; t < 300; ++t) {
        std::vector<double> token(3);
        for (auto& v : token) v = rng.normal();
        embeddings.insert(quantize(std::span<const double>(token), cb).embedding);
    }
    CHECK(embeddings.size() <= 4);
}
