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

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sparcode/evaluator.hpp"

using namespace sparcode;

namespace {

RankedList<double> ranked_from(const std::vector<std::uint32_t>& items) {
    RankedList<double> r;
    r.k = items.size();
    double score = static_cast<double>(items.size());
    for (const auto item : items) r.entries.push_back({item, score--});
    return r;
}

// Brute-force reference written independently of the evaluator path.
RankMetrics reference_metrics(const std::vector<std::uint32_t>& ranking,
                              const std::vector<std::uint32_t>& relevant, std::size_t k) {
    std::size_t hits = 0;
    double dcg = 0.0;
    for (std::size_t rank = 1; rank <= std::min(k, ranking.size()); ++rank) {
        const std::uint32_t item = ranking[rank - 1];
        if (std::find(relevant.begin(), relevant.end(), item) != relevant.end()) {
            ++hits;
            dcg += 1.0 / (std::log(static_cast<double>(rank + 1)) / std::log(2.0));
        }
    }
    double idcg = 0.0;
    for (std::size_t rank = 1; rank <= std::min(k, relevant.size()); ++rank) {
        idcg += 1.0 / (std::log(static_cast<double>(rank + 1)) / std::log(2.0));
    }
    RankMetrics m;
    m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
    m.precision = static_cast<double>(hits) / static_cast<double>(k);
    m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
    return m;
}

}  // namespace

TEST_CASE("single relevant item at rank 1") {
    const auto ranked = ranked_from({42, 7, 9, 1, 3});
    const std::vector<std::size_t> ks{5};
    const auto m = evaluate_ranking(ranked, {42}, std::span<const std::size_t>(ks));
    CHECK(m[0].recall == doctest::Approx(1.0));
    CHECK(m[0].precision == doctest::Approx(0.2));
    CHECK(m[0].ndcg == doctest::Approx(1.0));
}

TEST_CASE("relevant set disjoint from the ranking") {
    const auto ranked = ranked_from({1, 2, 3, 4, 5});
    const std::vector<std::size_t> ks{5};
    const auto m = evaluate_ranking(ranked, {99}, std::span<const std::size_t>(ks));
    CHECK(m[0].recall == 0.0);
    CHECK(m[0].precision == 0.0);
    CHECK(m[0].ndcg == 0.0);
}

TEST_CASE("single relevant item at rank 2 gives ndcg 0.63093") {
    const auto ranked = ranked_from({7, 42, 9, 1, 3});
    const std::vector<std::size_t> ks{5};
    const auto m = evaluate_ranking(ranked, {42}, std::span<const std::size_t>(ks));
    CHECK(std::fabs(m[0].ndcg - 1.0 / std::log2(3.0)) < 1e-12);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.5f", m[0].ndcg);
    CHECK(std::string(buf) == "0.63093");
}

TEST_CASE("empty relevant set is a metric error") {
    const auto ranked = ranked_from({1, 2, 3});
    const std::vector<std::size_t> ks{3};
    CHECK_THROWS_AS((void)evaluate_ranking(ranked, {}, std::span<const std::size_t>(ks)),
                    DataError);
}

TEST_CASE("metrics match the brute-force reference on random cases") {
    Rng rng(314);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 5 + rng.uniform_index(30);
        std::vector<std::uint32_t> ranking(n);
        for (std::size_t i = 0; i < n; ++i) ranking[i] = static_cast<std::uint32_t>(i * 3 + 1);
        rng.shuffle(ranking);
        std::vector<std::uint32_t> relevant;
        const std::size_t n_rel = 1 + rng.uniform_index(6);
        for (std::size_t i = 0; i < n_rel; ++i) {
            relevant.push_back(static_cast<std::uint32_t>(rng.uniform_index(3 * n)));
        }
        std::sort(relevant.begin(), relevant.end());
        relevant.erase(std::unique(relevant.begin(), relevant.end()), relevant.end());
        const std::size_t k = 1 + rng.uniform_index(n + 4);

        const auto ranked = ranked_from(ranking);
        const std::unordered_set<std::uint32_t> relevant_set(relevant.begin(), relevant.end());
        const std::vector<std::size_t> ks{k};
        const auto m = evaluate_ranking(ranked, relevant_set, std::span<const std::size_t>(ks));
        const auto ref = reference_metrics(ranking, relevant, k);
        CHECK(std::fabs(m[0].recall - ref.recall) < 1e-12);
        CHECK(std::fabs(m[0].precision - ref.precision) < 1e-12);
        CHECK(std::fabs(m[0].ndcg - ref.ndcg) < 1e-12);
    }
}

TEST_CASE("recall is non-decreasing in k and invariant below the cut") {
    Rng rng(99);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<std::uint32_t> ranking(20);
        for (std::size_t i = 0; i < ranking.size(); ++i) ranking[i] = static_cast<std::uint32_t>(i);
        rng.shuffle(ranking);
        std::unordered_set<std::uint32_t> relevant{1, 5, 11};
        const std::vector<std::size_t> ks{1, 3, 5, 10, 20};
        const auto ranked = ranked_from(ranking);
        const auto m = evaluate_ranking(ranked, relevant, std::span<const std::size_t>(ks));
        for (std::size_t i = 1; i < ks.size(); ++i) CHECK(m[i].recall >= m[i - 1].recall);

        // Permuting items below rank k leaves metrics at k unchanged.
        const std::size_t k = 5;
        auto permuted = ranking;
        std::reverse(permuted.begin() + k, permuted.end());
        const std::vector<std::size_t> kk{k};
        const auto a = evaluate_ranking(ranked, relevant, std::span<const std::size_t>(kk));
        const auto b =
            evaluate_ranking(ranked_from(permuted), relevant, std::span<const std::size_t>(kk));
        CHECK(a[0].recall == b[0].recall);
        CHECK(a[0].ndcg == b[0].ndcg);
    }
}

TEST_CASE("timing summary quantiles") {
    const auto s = summarize_timings({5.0, 1.0, 3.0, 2.0, 4.0});
    CHECK(s.mean_us == doctest::Approx(3.0));
    CHECK(s.median_us == doctest::Approx(3.0));
    CHECK(s.p95_us == doctest::Approx(5.0));
}

TEST_CASE("bias grid hits the requested sparsity targets") {
    std::vector<double> scores;
    for (int i = 0; i < 1000; ++i) scores.push_back(static_cast<double>(i) / 100.0);
    const std::vector<double> targets{0.0, 0.5, 0.9};
    const auto grid = bias_grid_for_sparsity(scores, std::span<const double>(targets));
    REQUIRE(grid.size() == 3);
    // target 0: everything cached (bias > -min).
    CHECK(grid[0] > -scores.front());
    // target 0.5: roughly half of the scores fall at or below -bias.
    std::size_t below = 0;
    for (const double s : scores) {
        if (s + grid[1] <= 0.0) ++below;
    }
    CHECK(std::fabs(static_cast<double>(below) / 1000.0 - 0.5) < 0.01);
}
