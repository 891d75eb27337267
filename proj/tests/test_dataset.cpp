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

#include "sparcode/dataset.hpp"

using namespace sparcode;

TEST_CASE("synthetic generation is reproducible and has the right cardinality") {
    SyntheticConfig cfg;
    cfg.num_users = 30;
    cfg.num_items = 25;
    cfg.latent_dim = 8;
    cfg.interactions_per_user = 5;
    cfg.seed = 123;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    CHECK(a.data.records.size() == 30 * 5);
    CHECK(interactions_to_csv(a.data) == interactions_to_csv(b.data));
    CHECK(truth_to_csv(a.truth) == truth_to_csv(b.truth));
}

TEST_CASE("alpha=0 ground truth is a pure dot product") {
    SyntheticConfig cfg;
    cfg.num_users = 4;
    cfg.num_items = 6;
    cfg.latent_dim = 4;
    cfg.interactions_per_user = 2;
    cfg.alpha = 0.0;
    cfg.seed = 9;
    const auto gen = generate_synthetic(cfg);
    // Rebuild latents with the same draw order and compare plain dot products.
    Rng rng(cfg.seed);
    Matrix<double> users(cfg.num_users, cfg.latent_dim);
    for (auto& v : users.data) v = rng.normal();
    Matrix<double> items(cfg.num_items, cfg.latent_dim);
    for (auto& v : items.data) v = rng.normal();
    for (std::size_t u = 0; u < cfg.num_users; ++u) {
        for (std::size_t i = 0; i < cfg.num_items; ++i) {
            const double d =
                dot(std::span<const double>(users.row(u)), std::span<const double>(items.row(i)));
            CHECK(gen.truth.at(u, i) == doctest::Approx(d).epsilon(1e-12));
        }
    }
}

TEST_CASE("synthetic sampler concentrates on high-affinity items") {
    SyntheticConfig cfg;
    cfg.num_users = 200;
    cfg.num_items = 100;
    cfg.latent_dim = 8;
    cfg.interactions_per_user = 10;
    cfg.tau = 0.5;
    cfg.seed = 77;
    const auto gen = generate_synthetic(cfg);
    const auto seqs = gen.data.user_sequences();
    std::size_t top_hit = 0;
    for (std::size_t u = 0; u < cfg.num_users; ++u) {
        std::uint32_t best = 0;
        for (std::uint32_t i = 1; i < cfg.num_items; ++i) {
            if (gen.truth.at(u, i) > gen.truth.at(u, best)) best = i;
        }
        for (const std::uint32_t item : seqs[u]) {
            if (item == best) {
                ++top_hit;
                break;
            }
        }
    }
    // Corpus-average frequency is 10/100; hitting the top item beats it when
    // the user interacted with it at all.
    CHECK(static_cast<double>(top_hit) / static_cast<double>(cfg.num_users) >= 0.95);
}

TEST_CASE("interaction CSV round-trips, sorts, and dedupes") {
    const std::string csv =
        "user_id,item_id,timestamp\n"
        "7,42,1000\n"
        "7,42,1000\n"
        "7,5,500\n"
        "2,9,10\n";
    const auto data = parse_interactions_csv(csv, "test");
    REQUIRE(data.records.size() == 3);
    CHECK(data.records[0] == Interaction{2, 9, 10});
    CHECK(data.records[1] == Interaction{7, 5, 500});
    CHECK(data.records[2] == Interaction{7, 42, 1000});
    CHECK(data.num_users == 8);
    CHECK(data.num_items == 43);
}

TEST_CASE("malformed interaction lines carry the line number") {
    const std::string csv =
        "user_id,item_id,timestamp\n"
        "7,abc,1000\n";
    try {
        (void)parse_interactions_csv(csv, "test");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS((void)parse_interactions_csv("who,what,when\n1,2,3\n", "test"), DataError);
}

TEST_CASE("leave_last_out holds out the last two interactions per user") {
    Dataset data;
    data.num_users = 2;
    data.num_items = 10;
    for (std::uint32_t t = 0; t < 5; ++t) data.records.push_back({0, t, t});
    data.records.push_back({1, 6, 0});  // too short, excluded
    const auto splits = split_dataset(data, {0.8, 0.1, 0.1}, SplitMode::leave_last_out, 1);
    REQUIRE(splits.train_users.size() == 1);
    CHECK(splits.train_users[0].second == std::vector<std::uint32_t>{0, 1, 2});
    REQUIRE(splits.val.size() == 1);
    CHECK(splits.val[0].target == 3);
    CHECK(splits.val[0].history == std::vector<std::uint32_t>{0, 1, 2});
    REQUIRE(splits.test.size() == 1);
    CHECK(splits.test[0].target == 4);
    CHECK(splits.test[0].history == std::vector<std::uint32_t>{0, 1, 2, 3});
    CHECK(splits.excluded_users == 1);
}

TEST_CASE("by_user split respects the 8:1:1 ratio over whole users") {
    Dataset data;
    data.num_users = 100;
    data.num_items = 50;
    for (std::uint32_t u = 0; u < 100; ++u) {
        for (std::uint32_t t = 0; t < 4; ++t) data.records.push_back({u, (u + t) % 50, t});
    }
    const auto splits = split_dataset(data, {0.8, 0.1, 0.1}, SplitMode::by_user, 3);
    CHECK(splits.train_users.size() == 80);
    CHECK(splits.val.size() == 10);
    CHECK(splits.test.size() == 10);
    // No user appears in two splits.
    std::set<std::uint32_t> seen;
    for (const auto& [u, seq] : splits.train_users) CHECK(seen.insert(u).second);
    for (const auto& q : splits.val) CHECK(seen.insert(q.user).second);
    for (const auto& q : splits.test) CHECK(seen.insert(q.user).second);
}

TEST_CASE("same seed gives identical split membership") {
    Dataset data;
    data.num_users = 40;
    data.num_items = 20;
    for (std::uint32_t u = 0; u < 40; ++u) {
        for (std::uint32_t t = 0; t < 5; ++t) data.records.push_back({u, (u * 3 + t) % 20, t});
    }
    const auto a = split_dataset(data, {0.8, 0.1, 0.1}, SplitMode::by_user, 11);
    const auto b = split_dataset(data, {0.8, 0.1, 0.1}, SplitMode::by_user, 11);
    CHECK(a.train_users == b.train_users);
    CHECK(a.val.size() == b.val.size());
    for (std::size_t i = 0; i < a.val.size(); ++i) CHECK(a.val[i].user == b.val[i].user);
}

TEST_CASE("leave_last_out partitions records without leakage") {
    SyntheticConfig cfg;
    cfg.num_users = 50;
    cfg.num_items = 40;
    cfg.latent_dim = 6;
    cfg.interactions_per_user = 6;
    cfg.seed = 5;
    const auto gen = generate_synthetic(cfg);
    const auto splits = split_dataset(gen.data, {0.8, 0.1, 0.1}, SplitMode::leave_last_out, 1);
    const auto seqs = gen.data.user_sequences();
    std::size_t total = 0;
    for (const auto& [u, train] : splits.train_users) {
        total += train.size();
        // Train plus the two held-out interactions reconstructs the sequence.
        const auto& seq = seqs[u];
        REQUIRE(train.size() + 2 == seq.size());
        for (std::size_t i = 0; i < train.size(); ++i) CHECK(train[i] == seq[i]);
    }
    total += splits.val.size() + splits.test.size();
    CHECK(total == gen.data.records.size());
    CHECK(splits.excluded_users == 0);
}

TEST_CASE("split rejects ratios that do not sum to one") {
    Dataset data;
    data.num_users = 1;
    data.num_items = 2;
    data.records.push_back({0, 0, 0});
    CHECK_THROWS_AS((void)split_dataset(data, {0.5, 0.2, 0.2}, SplitMode::by_user, 1), ConfigError);
}

TEST_CASE("synthetic config validation") {
    SyntheticConfig cfg;
    cfg.latent_dim = 7;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.latent_dim = 8;
    cfg.interactions_per_user = cfg.num_items + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
