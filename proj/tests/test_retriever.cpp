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

#include "sparcode/retriever.hpp"
#include "sparcode/selfcheck.hpp"

using namespace sparcode;

namespace {

SparCodeModel<float> small_model(std::uint64_t seed, std::size_t items = 40) {
    ModelConfig cfg;
    cfg.embed_dim = 6;
    cfg.token_dim = 6;
    cfg.query_tokens = 2;
    cfg.item_tokens = 2;
    cfg.num_books = 2;
    cfg.num_words = 3;
    cfg.gamma = 0.9;
    cfg.max_history = 8;
    cfg.kind = InteractionKind::inner_pdnn;
    cfg.scorer_hidden = {6};
    cfg.tokenizer_hidden = {};
    cfg.num_items = items;
    return make_model<float>(cfg, seed);
}

SparseInvertedIndex<float> two_code_index() {
    // code (1,1): {c9: 1.0, c24: 0.8}; code (1,2): {c9: 0.5, c13: 0.4, c25: 0.2}
    SparseInvertedIndex<float> index;
    index.num_books = 2;
    index.num_words = 4;
    index.num_codes_enumerated = 16;
    index.corpus_size = 32;
    PostingList<float> a;
    a.entries = {{9, 1.0f}, {24, 0.8f}};
    PostingList<float> b;
    b.entries = {{9, 0.5f}, {13, 0.4f}, {25, 0.2f}};
    index.postings.emplace_back(Code{1, 1}, a);
    index.postings.emplace_back(Code{1, 2}, b);
    return index;
}

}  // namespace

TEST_CASE("query_to_codes yields K_u codes, deterministically") {
    auto model = small_model(3);
    std::vector<std::uint32_t> history{1, 4, 9};
    const auto a = query_to_codes(model, std::span<const std::uint32_t>(history));
    const auto b = query_to_codes(model, std::span<const std::uint32_t>(history));
    CHECK(a.size() == 2);
    CHECK(a == b);
}

TEST_CASE("posting-list merge unions candidates and sums shared items") {
    const auto index = two_code_index();
    const std::vector<Code> codes{{1, 1}, {1, 2}};
    RetrievalStats stats;
    const auto ranked = retrieve_topk(codes, index, 10, &stats);
    REQUIRE(ranked.entries.size() == 4);  // {9, 24, 13, 25}
    CHECK(ranked.entries[0].item == 9);
    CHECK(ranked.entries[0].score == doctest::Approx(1.5));
    CHECK(ranked.entries[1].item == 24);
    CHECK(ranked.entries[2].item == 13);
    CHECK(ranked.entries[3].item == 25);
    CHECK(stats.postings_addressed == 2);
    CHECK(stats.entries_scanned == 5);
}

TEST_CASE("a single code returns its posting prefix") {
    const auto index = two_code_index();
    const std::vector<Code> codes{{1, 2}};
    const auto ranked = retrieve_topk(codes, index, 2);
    REQUIRE(ranked.entries.size() == 2);
    CHECK(ranked.entries[0].item == 9);
    CHECK(ranked.entries[1].item == 13);
}

TEST_CASE("duplicate codes double the contribution") {
    const auto index = two_code_index();
    const std::vector<Code> codes{{1, 1}, {1, 1}};
    const auto ranked = retrieve_topk(codes, index, 4);
    CHECK(ranked.entries[0].item == 9);
    CHECK(ranked.entries[0].score == doctest::Approx(2.0));
}

TEST_CASE("absent codes are empty posting lists, not errors") {
    const auto index = two_code_index();
    const std::vector<Code> codes{{0, 0}, {3, 3}};
    RetrievalStats stats;
    const auto ranked = retrieve_topk(codes, index, 5, &stats);
    CHECK(ranked.entries.empty());
    CHECK(stats.entries_scanned == 0);
}

TEST_CASE("retrieval never returns non-positive sums and obeys the latency contract") {
    auto model = small_model(5);
    std::vector<std::uint32_t> items(model.cfg.num_items);
    for (std::uint32_t i = 0; i < items.size(); ++i) items[i] = i;
    const auto codes = enumerate_full_grid(2, 3, 1 << 20);
    const auto index =
        build_index<float>(model, std::span<const std::uint32_t>(items), 0.0f, codes);
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<std::uint32_t> history;
        for (int i = 0; i < 3; ++i) {
            history.push_back(static_cast<std::uint32_t>(rng.uniform_index(items.size())));
        }
        const auto query_codes = query_to_codes(model, std::span<const std::uint32_t>(history));
        RetrievalStats stats;
        const auto ranked = retrieve_topk(query_codes, index, 10, &stats);
        for (const auto& r : ranked.entries) CHECK(r.score > 0.0f);
        std::size_t addressed_total = 0;
        for (const auto& code : query_codes) {
            if (const auto* list = index.find(code)) addressed_total += list->entries.size();
        }
        CHECK(stats.entries_scanned <= addressed_total);
        CHECK(stats.entries_scanned < items.size() * query_codes.size() + 1);
    }
}

TEST_CASE("oracle equivalence on a small untrained model") {
    auto model = small_model(7);
    Rng rng(3);
    std::vector<std::vector<std::uint32_t>> queries;
    for (int i = 0; i < 25; ++i) {
        std::vector<std::uint32_t> h;
        for (int j = 0; j < 4; ++j) {
            h.push_back(static_cast<std::uint32_t>(rng.uniform_index(model.cfg.num_items)));
        }
        queries.push_back(std::move(h));
    }
    const std::vector<std::size_t> ks{3, 7, 15};
    const std::vector<float> biases{0.0f, 0.4f, -0.3f};
    const auto result = selfcheck::oracle_equivalence<float>(
        model, queries, std::span<const std::size_t>(ks), std::span<const float>(biases));
    CHECK(result.mismatches == 0);
    CHECK(result.comparisons == queries.size() * ks.size() * biases.size());
}

TEST_CASE("exhaustive oracle returns every positive item when k is large") {
    auto model = small_model(9, 15);
    std::vector<std::uint32_t> history{1, 2, 3};
    const auto all = exhaustive_topk<float>(model, std::span<const std::uint32_t>(history), 1000,
                                            0.2f);
    for (const auto& r : all.entries) CHECK(r.score > 0.0f);
    // Very negative serve bias clears everything.
    const auto none = exhaustive_topk<float>(model, std::span<const std::uint32_t>(history), 10,
                                             -1e9f);
    CHECK(none.entries.empty());
}

TEST_CASE("two-tower top-k is exact dot-product ranking with id tie-break") {
    Matrix<float> items(2, 2);
    items.at(0, 0) = 2.0f;  // a
    items.at(1, 1) = 3.0f;  // b
    std::vector<float> q{1.0f, 0.0f};
    const auto top1 = twotower_topk<float>(std::span<const float>(q), items, 1);
    REQUIRE(top1.entries.size() == 1);
    CHECK(top1.entries[0].item == 0);
    CHECK(top1.entries[0].score == doctest::Approx(2.0));
    const auto top2 = twotower_topk<float>(std::span<const float>(q), items, 2);
    REQUIRE(top2.entries.size() == 2);
    CHECK(top2.entries[0].item == 0);
    CHECK(top2.entries[1].item == 1);
    CHECK(top2.entries[1].score == doctest::Approx(0.0));

    // Orthogonal query: all zero scores, ranked by item id.
    std::vector<float> q2{0.0f, 0.0f};
    const auto tz = twotower_topk<float>(std::span<const float>(q2), items, 2);
    CHECK(tz.entries[0].item == 0);
    CHECK(tz.entries[1].item == 1);
}
