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

// Ranking metrics (binary gains, ideal-DCG truncated at min(k, |relevant|))
// and the sparsity / performance / latency harness.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/indexer.hpp"
#include "sparcode/retriever.hpp"

namespace sparcode {

struct RankMetrics {
    double recall = 0.0;
    double precision = 0.0;
    double ndcg = 0.0;
};

struct EvalQuery {
    std::vector<std::uint32_t> history;
    std::vector<std::uint32_t> relevant;
};

// Metrics at each k. Ranks are 1-based; gains binary.
template <typename T>
inline std::vector<RankMetrics> evaluate_ranking(const RankedList<T>& ranked,
                                                 const std::unordered_set<std::uint32_t>& relevant,
                                                 std::span<const std::size_t> ks) {
    if (relevant.empty()) throw DataError("evaluate_ranking: empty relevant set");
    std::vector<RankMetrics> out;
    out.reserve(ks.size());
    for (const std::size_t k : ks) {
        if (k == 0) throw ConfigError("evaluate_ranking: k must be >= 1");
        std::size_t hits = 0;
        double dcg = 0.0;
        const std::size_t depth = std::min(k, ranked.entries.size());
        for (std::size_t r = 0; r < depth; ++r) {
            if (relevant.contains(ranked.entries[r].item)) {
                ++hits;
                dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
            }
        }
        double idcg = 0.0;
        const std::size_t ideal = std::min(k, relevant.size());
        for (std::size_t r = 0; r < ideal; ++r) {
            idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
        RankMetrics m;
        m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
        m.precision = static_cast<double>(hits) / static_cast<double>(k);
        m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
        out.push_back(m);
    }
    return out;
}

struct MetricsReport {
    std::vector<std::size_t> ks;
    std::vector<RankMetrics> mean;  // aligned with ks
    double sparsity = -1.0;         // echoed from the index when available
    double average_items = -1.0;
    std::size_t queries = 0;
};

// Mean metrics over queries served from the index.
template <typename T>
inline MetricsReport evaluate_index(const SparCodeModel<T>& model,
                                    const SparseInvertedIndex<T>& index,
                                    std::span<const EvalQuery> queries,
                                    std::span<const std::size_t> ks) {
    MetricsReport report;
    report.ks.assign(ks.begin(), ks.end());
    report.mean.assign(ks.size(), RankMetrics{});
    report.queries = queries.size();
    if (queries.empty()) return report;
    std::size_t max_k = 0;
    for (const std::size_t k : ks) max_k = std::max(max_k, k);
    for (const auto& query : queries) {
        const auto codes = query_to_codes(model, std::span<const std::uint32_t>(query.history));
        const auto ranked = retrieve_topk(codes, index, max_k);
        const std::unordered_set<std::uint32_t> relevant(query.relevant.begin(),
                                                         query.relevant.end());
        const auto metrics = evaluate_ranking(ranked, relevant, ks);
        for (std::size_t i = 0; i < ks.size(); ++i) {
            report.mean[i].recall += metrics[i].recall;
            report.mean[i].precision += metrics[i].precision;
            report.mean[i].ndcg += metrics[i].ndcg;
        }
    }
    const double inv = 1.0 / static_cast<double>(queries.size());
    for (auto& m : report.mean) {
        m.recall *= inv;
        m.precision *= inv;
        m.ndcg *= inv;
    }
    const auto sp = sparsity_metrics(index);
    report.sparsity = sp.sparsity;
    report.average_items = sp.average_items;
    return report;
}

inline std::string metrics_to_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "key,value\n";
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
        const std::string k = std::to_string(report.ks[i]);
        os << "recall@" << k << ',' << fmt_number(report.mean[i].recall) << '\n';
        os << "precision@" << k << ',' << fmt_number(report.mean[i].precision) << '\n';
        os << "ndcg@" << k << ',' << fmt_number(report.mean[i].ndcg) << '\n';
    }
    if (report.sparsity >= 0.0) {
        os << "sparsity," << fmt_number(report.sparsity) << '\n';
        os << "average_items," << fmt_number(report.average_items) << '\n';
    }
    os << "queries," << report.queries << '\n';
    return os.str();
}

struct TimingSummary {
    double mean_us = 0.0;
    double median_us = 0.0;
    double p95_us = 0.0;
    std::vector<double> samples_us;
};

inline TimingSummary summarize_timings(std::vector<double> samples) {
    TimingSummary s;
    s.samples_us = samples;
    if (samples.empty()) return s;
    double sum = 0.0;
    for (const double v : samples) sum += v;
    s.mean_us = sum / static_cast<double>(samples.size());
    std::sort(samples.begin(), samples.end());
    s.median_us = samples[(samples.size() - 1) / 2];
    const std::size_t p95_idx =
        std::min(samples.size() - 1,
                 static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size()))) - 1);
    s.p95_us = samples[p95_idx];
    return s;
}

struct BenchReport {
    TimingSummary sparcode;
    TimingSummary twotower;
    std::size_t entries_scanned = 0;         // instrumentation counter total
    std::size_t addressed_posting_length = 0;  // sum of addressed posting list lengths
    std::size_t queries = 0;
    std::size_t repeats = 0;
};

// Per-query wall time at batch size 1, one warmup pass excluded, monotonic
// clock. Also verifies the latency contract by re-deriving the addressed
// posting lengths after timing.
template <typename T>
inline BenchReport latency_bench(const SparCodeModel<T>& model, const SparseInvertedIndex<T>& index,
                                 const TwoTowerModel<T>& tt, const Matrix<T>& tt_items,
                                 std::span<const EvalQuery> queries, std::size_t k,
                                 std::size_t repeats) {
    if (repeats == 0) throw ConfigError("latency_bench: repeats must be >= 1");
    using clock = std::chrono::steady_clock;
    BenchReport report;
    report.queries = queries.size();
    report.repeats = repeats;

    for (const auto& q : queries) {  // warmup
        const auto codes = query_to_codes(model, std::span<const std::uint32_t>(q.history));
        (void)retrieve_topk(codes, index, k);
        const auto qvec = tt.query_vector(std::span<const std::uint32_t>(q.history));
        (void)twotower_topk(std::span<const T>(qvec), tt_items, k);
    }

    std::vector<double> sc_samples, tt_samples;
    RetrievalStats stats;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
        for (const auto& q : queries) {
            const auto t0 = clock::now();
            const auto codes = query_to_codes(model, std::span<const std::uint32_t>(q.history));
            const auto ranked = retrieve_topk(codes, index, k, &stats);
            const auto t1 = clock::now();
            (void)ranked;
            sc_samples.push_back(
                std::chrono::duration<double, std::micro>(t1 - t0).count());
            if (rep == 0) {
                for (const auto& code : codes) {
                    const auto* list = index.find(code);
                    if (list) report.addressed_posting_length += list->entries.size();
                }
            }

            const auto t2 = clock::now();
            const auto qvec = tt.query_vector(std::span<const std::uint32_t>(q.history));
            const auto tt_ranked = twotower_topk(std::span<const T>(qvec), tt_items, k);
            const auto t3 = clock::now();
            (void)tt_ranked;
            tt_samples.push_back(
                std::chrono::duration<double, std::micro>(t3 - t2).count());
        }
    }
    report.addressed_posting_length *= repeats;
    report.entries_scanned = stats.entries_scanned;
    report.sparcode = summarize_timings(std::move(sc_samples));
    report.twotower = summarize_timings(std::move(tt_samples));
    return report;
}

inline std::string bench_to_csv(const BenchReport& report) {
    std::ostringstream os;
    os << "system,sample,time_us\n";
    for (std::size_t i = 0; i < report.sparcode.samples_us.size(); ++i) {
        os << "sparcode," << i << ',' << fmt_number(report.sparcode.samples_us[i]) << '\n';
    }
    for (std::size_t i = 0; i < report.twotower.samples_us.size(); ++i) {
        os << "twotower," << i << ',' << fmt_number(report.twotower.samples_us[i]) << '\n';
    }
    return os.str();
}

// All pre-bias interaction scores over codes x items, used to place the
// serve-bias grid at chosen sparsity quantiles.
template <typename T>
inline std::vector<double> all_interaction_scores(const SparCodeModel<T>& model,
                                                  std::span<const std::uint32_t> items,
                                                  const std::vector<Code>& codes) {
    const auto item_tokens = corpus_item_tokens(model, items);
    std::vector<double> scores;
    scores.reserve(codes.size() * items.size());
    for (const auto& code : codes) {
        const auto emb = code_embedding(model.codebooks, code);
        for (const std::uint32_t item : items) {
            scores.push_back(static_cast<double>(
                interaction_score(std::span<const T>(emb), item_tokens[item], model.scorer)));
        }
    }
    return scores;
}

// Serve-bias values hitting the requested sparsity levels: sparsity(b~) is
// the fraction of scores with S + b~ <= 0, so b~ = -quantile(S, target).
// target 0 gets a margin so everything is cached.
inline std::vector<double> bias_grid_for_sparsity(std::vector<double> scores,
                                                  std::span<const double> targets) {
    if (scores.empty()) throw DataError("bias_grid_for_sparsity: no scores");
    std::sort(scores.begin(), scores.end());
    std::vector<double> grid;
    for (const double t : targets) {
        if (!(t >= 0.0 && t < 1.0)) {
            throw ConfigError("bias_grid_for_sparsity: targets must be in [0,1)");
        }
        if (t == 0.0) {
            grid.push_back(-scores.front() + 1.0);
        } else {
            const auto idx = static_cast<std::size_t>(t * static_cast<double>(scores.size() - 1));
            grid.push_back(-scores[idx]);
        }
    }
    return grid;
}

struct SweepRow {
    double serve_bias = 0.0;
    double sparsity = 0.0;
    double average_items = 0.0;
    std::size_t cached_entries = 0;
    std::vector<RankMetrics> metrics;  // aligned with ks
    double median_latency_us = 0.0;
};

// One index build + evaluation per grid value.
template <typename T>
inline std::vector<SweepRow> sparsity_sweep(const SparCodeModel<T>& model,
                                            std::span<const std::uint32_t> items,
                                            std::span<const EvalQuery> queries,
                                            std::span<const std::size_t> ks,
                                            std::span<const double> bias_grid,
                                            const std::vector<Code>& codes,
                                            std::size_t workers = 1) {
    if (bias_grid.empty()) throw ConfigError("sparsity_sweep: empty bias grid");
    using clock = std::chrono::steady_clock;
    std::vector<SweepRow> rows;
    std::size_t max_k = 1;
    for (const std::size_t k : ks) max_k = std::max(max_k, k);
    for (const double b : bias_grid) {
        const auto index = build_index(model, items, static_cast<T>(b), codes, workers);
        SweepRow row;
        row.serve_bias = b;
        const auto sp = sparsity_metrics(index);
        row.sparsity = sp.sparsity;
        row.average_items = sp.average_items;
        row.cached_entries = index.cached_entries();
        row.metrics.assign(ks.size(), RankMetrics{});
        std::vector<double> times;
        times.reserve(queries.size());
        for (const auto& q : queries) {
            const auto t0 = clock::now();
            const auto query_codes = query_to_codes(model, std::span<const std::uint32_t>(q.history));
            const auto ranked = retrieve_topk(query_codes, index, max_k);
            const auto t1 = clock::now();
            times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
            const std::unordered_set<std::uint32_t> relevant(q.relevant.begin(), q.relevant.end());
            const auto metrics = evaluate_ranking(ranked, relevant, ks);
            for (std::size_t i = 0; i < ks.size(); ++i) {
                row.metrics[i].recall += metrics[i].recall;
                row.metrics[i].precision += metrics[i].precision;
                row.metrics[i].ndcg += metrics[i].ndcg;
            }
        }
        if (!queries.empty()) {
            const double inv = 1.0 / static_cast<double>(queries.size());
            for (auto& m : row.metrics) {
                m.recall *= inv;
                m.precision *= inv;
                m.ndcg *= inv;
            }
            row.median_latency_us = summarize_timings(times).median_us;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows,
                                std::span<const std::size_t> ks) {
    std::ostringstream os;
    os << "b_serve,sparsity,average_items,cached_entries";
    for (const std::size_t k : ks) os << ",recall@" << k << ",ndcg@" << k;
    os << ",median_latency_us\n";
    for (const auto& row : rows) {
        os << fmt_number(row.serve_bias) << ',' << fmt_number(row.sparsity) << ','
           << fmt_number(row.average_items) << ',' << row.cached_entries;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            os << ',' << fmt_number(row.metrics[i].recall) << ',' << fmt_number(row.metrics[i].ndcg);
        }
        os << ',' << fmt_number(row.median_latency_us) << '\n';
    }
    return os.str();
}

}  // namespace sparcode
