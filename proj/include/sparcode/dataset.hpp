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

// Interaction data: CSV ingestion, deterministic splits, and a synthetic
// generator whose ground-truth affinity carries a coordinate-wise max term
// that a bilinear (two-tower) scorer cannot represent.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/io.hpp"
#include "sparcode/matrix.hpp"
#include "sparcode/rng.hpp"

namespace sparcode {

struct Interaction {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    std::int64_t timestamp = 0;

    bool operator==(const Interaction&) const = default;
};

struct Dataset {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::vector<Interaction> records;  // sorted by (user, timestamp, item)

    // Per-user item sequences in time order.
    std::vector<std::vector<std::uint32_t>> user_sequences() const {
        std::vector<std::vector<std::uint32_t>> seqs(num_users);
        for (const auto& r : records) seqs[r.user].push_back(r.item);
        return seqs;
    }
};

struct SyntheticConfig {
    std::size_t num_users = 2000;
    std::size_t num_items = 500;
    std::size_t latent_dim = 16;
    std::size_t interactions_per_user = 12;
    double alpha = 1.0;  // weight of the nonlinear max term
    double tau = 0.3;    // softmax temperature
    std::uint64_t seed = 42;

    void validate() const {
        if (num_users == 0 || num_items == 0) throw ConfigError("synthetic: empty universe");
        if (latent_dim == 0 || latent_dim % 2 != 0) {
            throw ConfigError("synthetic: latent_dim must be even and > 0");
        }
        if (alpha < 0.0) throw ConfigError("synthetic: alpha must be >= 0");
        if (!(tau > 0.0)) throw ConfigError("synthetic: tau must be > 0");
        if (interactions_per_user > num_items) {
            throw ConfigError("synthetic: interactions_per_user (" +
                              std::to_string(interactions_per_user) + ") exceeds num_items (" +
                              std::to_string(num_items) + ")");
        }
        if (interactions_per_user == 0) throw ConfigError("synthetic: interactions_per_user must be >= 1");
    }
};

struct SyntheticData {
    Dataset data;
    Matrix<double> truth;  // num_users x num_items hidden affinities
};

// True affinity s*(u,v) = u.v + alpha * max_d(u_d * v_d). Interactions are
// sampled per user without replacement proportional to softmax(s*/tau)
// via Gumbel top-k; timestamps follow the draw order.
inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    Matrix<double> users(cfg.num_users, cfg.latent_dim);
    for (auto& v : users.data) v = rng.normal();
    Matrix<double> items(cfg.num_items, cfg.latent_dim);
    for (auto& v : items.data) v = rng.normal();

    SyntheticData out;
    out.truth = Matrix<double>(cfg.num_users, cfg.num_items);
    out.data.num_users = cfg.num_users;
    out.data.num_items = cfg.num_items;
    out.data.records.reserve(cfg.num_users * cfg.interactions_per_user);

    std::vector<std::pair<double, std::uint32_t>> keyed(cfg.num_items);
    for (std::uint32_t u = 0; u < cfg.num_users; ++u) {
        auto urow = users.row(u);
        for (std::uint32_t i = 0; i < cfg.num_items; ++i) {
            auto irow = items.row(i);
            double d = 0.0, mx = urow[0] * irow[0];
            for (std::size_t c = 0; c < cfg.latent_dim; ++c) {
                const double p = urow[c] * irow[c];
                d += p;
                if (p > mx) mx = p;
            }
            out.truth.at(u, i) = d + cfg.alpha * mx;
        }
        for (std::uint32_t i = 0; i < cfg.num_items; ++i) {
            keyed[i] = {out.truth.at(u, i) / cfg.tau + rng.gumbel(), i};
        }
        std::partial_sort(keyed.begin(), keyed.begin() + cfg.interactions_per_user, keyed.end(),
                          [](const auto& a, const auto& b) {
                              return a.first > b.first || (a.first == b.first && a.second < b.second);
                          });
        // Timestamps are a random permutation of the sampled set. Keeping the
        // Gumbel draw order would make the time-wise last interaction
        // systematically the least preferred of the set, which poisons
        // leave-last-out evaluation.
        std::vector<std::uint32_t> sampled(cfg.interactions_per_user);
        for (std::size_t t = 0; t < cfg.interactions_per_user; ++t) sampled[t] = keyed[t].second;
        rng.shuffle(sampled);
        for (std::size_t t = 0; t < cfg.interactions_per_user; ++t) {
            out.data.records.push_back({u, sampled[t], static_cast<std::int64_t>(t)});
        }
    }
    return out;
}

inline std::string interactions_to_csv(const Dataset& data) {
    std::ostringstream os;
    os << "user_id,item_id,timestamp\n";
    for (const auto& r : data.records) {
        os << r.user << ',' << r.item << ',' << r.timestamp << '\n';
    }
    return os.str();
}

inline Dataset parse_interactions_csv(const std::string& text, const std::string& context) {
    Dataset data;
    std::size_t lineno = 0;
    bool header_seen = false;
    for (auto raw : split(text, '\n')) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != "user_id,item_id,timestamp") {
                throw DataError(context + ": unknown header '" + std::string(line) + "'");
            }
            header_seen = true;
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != 3) {
            throw DataError(context + " line " + std::to_string(lineno) + ": expected 3 fields");
        }
        Interaction r;
        const std::string where = context + " line " + std::to_string(lineno);
        r.user = parse_number<std::uint32_t>(trim(fields[0]), where);
        r.item = parse_number<std::uint32_t>(trim(fields[1]), where);
        r.timestamp = parse_number<std::int64_t>(trim(fields[2]), where);
        if (r.timestamp < 0) throw DataError(where + ": negative timestamp");
        data.records.push_back(r);
    }
    if (!header_seen) throw DataError(context + ": missing header");
    std::sort(data.records.begin(), data.records.end(), [](const Interaction& a, const Interaction& b) {
        if (a.user != b.user) return a.user < b.user;
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.item < b.item;
    });
    data.records.erase(std::unique(data.records.begin(), data.records.end()), data.records.end());
    for (const auto& r : data.records) {
        data.num_users = std::max(data.num_users, static_cast<std::size_t>(r.user) + 1);
        data.num_items = std::max(data.num_items, static_cast<std::size_t>(r.item) + 1);
    }
    return data;
}

inline Dataset load_interactions(const std::string& path) {
    return parse_interactions_csv(read_text_file(path), path);
}

inline std::string truth_to_csv(const Matrix<double>& truth) {
    std::ostringstream os;
    os << "user_id,affinities\n";
    for (std::size_t u = 0; u < truth.rows; ++u) {
        os << u;
        for (std::size_t i = 0; i < truth.cols; ++i) os << ',' << fmt_number(truth.at(u, i));
        os << '\n';
    }
    return os.str();
}

enum class SplitMode { by_user, leave_last_out };

inline SplitMode split_mode_from_name(const std::string& s) {
    if (s == "by_user") return SplitMode::by_user;
    if (s == "leave_last_out") return SplitMode::leave_last_out;
    throw ConfigError("unknown split mode: " + s);
}

inline std::string split_mode_name(SplitMode m) {
    return m == SplitMode::by_user ? "by_user" : "leave_last_out";
}

// One held-out evaluation query: the history seen so far and the single
// relevant target.
struct QueryExample {
    std::uint32_t user = 0;
    std::vector<std::uint32_t> history;
    std::uint32_t target = 0;
};

struct Splits {
    SplitMode mode = SplitMode::leave_last_out;
    // user id -> training item sequence (time order)
    std::vector<std::pair<std::uint32_t, std::vector<std::uint32_t>>> train_users;
    std::vector<QueryExample> val;
    std::vector<QueryExample> test;
    std::size_t excluded_users = 0;
};

// leave_last_out: per user, last interaction -> test, second-last -> val,
// rest -> train; users with < 3 interactions are excluded and counted.
// by_user: whole users are assigned to splits by a seeded shuffle; held-out
// users contribute a query from all-but-last interactions targeting the last.
inline Splits split_dataset(const Dataset& data, const std::array<double, 3>& ratios, SplitMode mode,
                            std::uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("split: ratios must sum to 1");
    Splits out;
    out.mode = mode;
    const auto seqs = data.user_sequences();
    if (mode == SplitMode::leave_last_out) {
        for (std::uint32_t u = 0; u < data.num_users; ++u) {
            const auto& seq = seqs[u];
            if (seq.size() < 3) {
                if (!seq.empty()) ++out.excluded_users;
                continue;
            }
            std::vector<std::uint32_t> train(seq.begin(), seq.end() - 2);
            QueryExample val{u, train, seq[seq.size() - 2]};
            std::vector<std::uint32_t> test_hist(seq.begin(), seq.end() - 1);
            QueryExample test{u, std::move(test_hist), seq.back()};
            out.train_users.emplace_back(u, std::move(train));
            out.val.push_back(std::move(val));
            out.test.push_back(std::move(test));
        }
        return out;
    }
    std::vector<std::uint32_t> users;
    for (std::uint32_t u = 0; u < data.num_users; ++u) {
        if (!seqs[u].empty()) users.push_back(u);
    }
    Rng rng(seed);
    rng.shuffle(users);
    const std::size_t n = users.size();
    const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t u = users[i];
        const auto& seq = seqs[u];
        if (i < n_train) {
            out.train_users.emplace_back(u, seq);
        } else {
            if (seq.size() < 2) {
                ++out.excluded_users;
                continue;
            }
            QueryExample q{u, std::vector<std::uint32_t>(seq.begin(), seq.end() - 1), seq.back()};
            if (i < n_train + n_val) {
                out.val.push_back(std::move(q));
            } else {
                out.test.push_back(std::move(q));
            }
        }
    }
    std::sort(out.train_users.begin(), out.train_users.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    auto by_user_id = [](const QueryExample& a, const QueryExample& b) { return a.user < b.user; };
    std::sort(out.val.begin(), out.val.end(), by_user_id);
    std::sort(out.test.begin(), out.test.end(), by_user_id);
    return out;
}

}  // namespace sparcode
