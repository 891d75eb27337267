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

// Training: sampled-softmax matching loss plus weighted commitment loss.
// Backprop (Adam) updates everything except the codebooks; the codebooks
// move only through the EMA step. The quantized query embedding entering
// the scorer is a stop-gradient input, so the query tower learns from the
// commitment loss alone.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "sparcode/adam.hpp"
#include "sparcode/dataset.hpp"
#include "sparcode/error.hpp"
#include "sparcode/model.hpp"
#include "sparcode/retriever.hpp"
#include "sparcode/rng.hpp"
#include "sparcode/two_tower.hpp"

namespace sparcode {

struct LossConfig {
    double lambda = 0.25;                  // commitment weight
    std::size_t negatives_per_positive = 50;

    void validate() const {
        if (lambda < 0.0) throw ConfigError("loss: lambda must be >= 0");
        if (negatives_per_positive == 0) throw ConfigError("loss: needs at least one negative");
    }
};

struct TrainConfig {
    double lr = 0.001;
    std::size_t epochs = 5;
    std::size_t batch_size = 128;
    std::uint64_t seed = 42;
    double l2_embedding = 1e-6;
    double dropout = 0.1;
    LossConfig loss;
    std::size_t targets_per_user = 4;  // sampled training positions per user per epoch
    std::size_t val_users = 0;         // 0 = evaluate every validation query
    std::size_t val_k = 50;            // checkpoint selection metric Recall@k

    void validate() const {
        if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
        if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must be in [0,1)");
        if (l2_embedding < 0.0) throw ConfigError("train: l2_embedding must be >= 0");
        if (targets_per_user == 0) throw ConfigError("train: targets_per_user must be >= 1");
        loss.validate();
    }
};

// n distinct items uniformly without replacement from corpus \ positives.
inline std::vector<std::uint32_t> sample_negatives(std::span<const std::uint32_t> corpus,
                                                   const std::unordered_set<std::uint32_t>& positives,
                                                   std::size_t n, Rng& rng) {
    std::vector<std::uint32_t> available;
    available.reserve(corpus.size());
    for (const std::uint32_t item : corpus) {
        if (!positives.contains(item)) available.push_back(item);
    }
    if (available.size() < n) {
        throw DataError("sample_negatives: requested " + std::to_string(n) +
                        " negatives but only " + std::to_string(available.size()) +
                        " items are available outside the positive set");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform_index(available.size() - i);
        std::swap(available[i], available[j]);
    }
    available.resize(n);
    return available;
}

// -log( exp(y_pos) / (exp(y_pos) + sum exp(y_neg)) ) with max-shift.
inline double sampled_softmax_loss(double y_pos, std::span<const double> y_negs) {
    if (y_negs.empty()) throw ShapeError("sampled_softmax_loss: needs at least one negative");
    double m = y_pos;
    for (const double y : y_negs) m = std::max(m, y);
    double denom = std::exp(y_pos - m);
    for (const double y : y_negs) denom += std::exp(y - m);
    return std::log(denom) - (y_pos - m);
}

inline double total_loss(double match, double commit, double lambda) {
    if (lambda < 0.0) throw ConfigError("total_loss: lambda must be >= 0");
    return match + lambda * commit;
}

struct TrainExample {
    std::vector<std::uint32_t> history;
    std::uint32_t positive = 0;
    std::vector<std::uint32_t> negatives;
};

struct ExampleLosses {
    double match = 0.0;
    double commit = 0.0;
};

// Forward (and optionally backward) for one training example. Gradients are
// accumulated into `grads` scaled by `scale`; codeword assignments are
// recorded into `assign` for the EMA step. With grads == nullptr this is a
// pure evaluation.
template <typename T>
inline ExampleLosses sparcode_example(const SparCodeModel<T>& model, const TrainExample& ex,
                                      double lambda, T scale, SparCodeModel<T>* grads,
                                      BatchAssignments<T>* assign, double dropout = 0.0,
                                      Rng* rng = nullptr) {
    TokenizerTrace<T> qtrace;
    const Matrix<T> qtokens =
        model.query_token_matrix(std::span<const std::uint32_t>(ex.history), &qtrace, dropout, rng);
    const auto quant = model.quantize_tokens(qtokens);
    if (assign) {
        for (const auto& q : quant) record_assignment(*assign, model.codebooks, q);
    }
    const double commit = static_cast<double>(commitment_loss(qtokens, quant));

    struct CandState {
        std::uint32_t item;
        TokenizerTrace<T> ttrace;
        Matrix<T> tokens;
        std::vector<ScorerTrace<T>> straces;
        std::vector<T> s;
        double y;
    };
    std::vector<CandState> cands;
    cands.reserve(1 + ex.negatives.size());
    auto eval_candidate = [&](std::uint32_t item) {
        CandState c;
        c.item = item;
        c.tokens = model.item_token_matrix(item, &c.ttrace, dropout, rng);
        c.straces.resize(qtokens.rows);
        c.s.resize(qtokens.rows);
        double y = 0.0;
        for (std::size_t i = 0; i < qtokens.rows; ++i) {
            c.s[i] = interaction_score(std::span<const T>(quant[i].embedding), c.tokens,
                                       model.scorer, &c.straces[i]);
            y += static_cast<double>(sparse_score(c.s[i], model.train_bias(i)));
        }
        c.y = y;
        cands.push_back(std::move(c));
    };
    eval_candidate(ex.positive);
    for (const std::uint32_t neg : ex.negatives) eval_candidate(neg);

    std::vector<double> y_negs;
    y_negs.reserve(ex.negatives.size());
    for (std::size_t c = 1; c < cands.size(); ++c) y_negs.push_back(cands[c].y);
    const double match = sampled_softmax_loss(cands[0].y, std::span<const double>(y_negs));

    if (grads) {
        double m = cands[0].y;
        for (const auto& c : cands) m = std::max(m, c.y);
        double denom = 0.0;
        for (const auto& c : cands) denom += std::exp(c.y - m);
        for (std::size_t ci = 0; ci < cands.size(); ++ci) {
            auto& c = cands[ci];
            const double p = std::exp(c.y - m) / denom;
            const T dy = scale * static_cast<T>(p - (ci == 0 ? 1.0 : 0.0));
            Matrix<T> d_tokens(c.tokens.rows, c.tokens.cols);
            for (std::size_t i = 0; i < qtokens.rows; ++i) {
                if (c.s[i] + model.train_bias(i) > T(0)) {
                    interaction_backward(model.scorer, c.straces[i],
                                         std::span<const T>(quant[i].embedding), c.tokens, dy,
                                         grads->scorer, d_tokens);
                    grads->scorer.bias[model.scorer.bias.size() == 1 ? 0 : i] += dy;
                }
            }
            const auto d_row =
                tokenize_backward(model.item_tokenizer, c.ttrace, d_tokens, grads->item_tokenizer);
            axpy(T(1), std::span<const T>(d_row.data(), d_row.size()),
                 grads->item_table.rows.row(c.item + 1));
        }
        // Commitment pulls original tokens toward their codewords; the
        // quantized side is stop-gradient.
        Matrix<T> d_qtokens(qtokens.rows, qtokens.cols);
        const T cscale = scale * static_cast<T>(2.0 * lambda);
        for (std::size_t i = 0; i < qtokens.rows; ++i) {
            auto trow = qtokens.row(i);
            auto drow = d_qtokens.row(i);
            for (std::size_t cidx = 0; cidx < qtokens.cols; ++cidx) {
                drow[cidx] = cscale * (trow[cidx] - quant[i].embedding[cidx]);
            }
        }
        const auto d_row =
            tokenize_backward(model.query_tokenizer, qtrace, d_qtokens, grads->query_tokenizer);
        const auto rows = model.history_rows(std::span<const std::uint32_t>(ex.history));
        auto& history_grads =
            model.cfg.tied_embeddings ? grads->item_table : grads->history_table;
        for (const std::uint32_t row : rows) {
            if (row == 0) continue;  // frozen pad
            axpy(T(1), std::span<const T>(d_row.data(), d_row.size()),
                 history_grads.rows.row(row));
        }
    }
    return {match, commit};
}

// Mean Eq.-15 objective over the examples plus the embedding L2 penalty.
// This is the scalar the finite-difference oracle probes.
template <typename T>
inline double sparcode_batch_objective(const SparCodeModel<T>& model,
                                       std::span<const TrainExample> examples, double lambda,
                                       double l2) {
    double total = 0.0;
    for (const auto& ex : examples) {
        const auto losses = sparcode_example<T>(model, ex, lambda, T(1), nullptr, nullptr);
        total += losses.match + lambda * losses.commit;
    }
    total /= static_cast<double>(examples.size());
    if (l2 > 0.0) {
        double sq = 0.0;
        for (const T v : model.history_table.rows.data) sq += static_cast<double>(v) * v;
        for (const T v : model.item_table.rows.data) sq += static_cast<double>(v) * v;
        total += l2 * sq;
    }
    return total;
}

// Analytic counterpart of sparcode_batch_objective: accumulates gradients
// for every Adam-managed parameter into a zeroed mirror model.
template <typename T>
inline void sparcode_batch_gradients(const SparCodeModel<T>& model,
                                     std::span<const TrainExample> examples, double lambda,
                                     double l2, SparCodeModel<T>& grads) {
    const T scale = T(1) / static_cast<T>(examples.size());
    for (const auto& ex : examples) {
        sparcode_example<T>(model, ex, lambda, scale, &grads, nullptr);
    }
    if (l2 > 0.0) {
        const T two_l2 = static_cast<T>(2.0 * l2);
        axpy(two_l2, std::span<const T>(model.history_table.rows.data.data(),
                                        model.history_table.rows.data.size()),
             std::span<T>(grads.history_table.rows.data.data(),
                          grads.history_table.rows.data.size()));
        axpy(two_l2,
             std::span<const T>(model.item_table.rows.data.data(), model.item_table.rows.data.size()),
             std::span<T>(grads.item_table.rows.data.data(), grads.item_table.rows.data.size()));
    }
}

struct EpochLog {
    std::size_t epoch = 0;
    double match = 0.0;
    double commit = 0.0;
    double total = 0.0;
    double val_recall = 0.0;
};

inline std::string train_log_to_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os << "epoch,match_loss,commit_loss,total_loss,val_recall50\n";
    for (const auto& e : log) {
        os << e.epoch << ',' << fmt_number(e.match) << ',' << fmt_number(e.commit) << ','
           << fmt_number(e.total) << ',' << fmt_number(e.val_recall) << '\n';
    }
    return os.str();
}

namespace detail {

// Per-epoch training examples: for each user, `targets` cut positions are
// sampled without replacement; the history is everything before the cut.
inline std::vector<TrainExample> draw_epoch_examples(
    const Splits& splits, std::span<const std::uint32_t> corpus,
    const std::vector<std::unordered_set<std::uint32_t>>& user_positives, std::size_t targets,
    std::size_t negatives, Rng& rng) {
    std::vector<TrainExample> examples;
    std::vector<std::size_t> positions;
    for (std::size_t ui = 0; ui < splits.train_users.size(); ++ui) {
        const auto& [user, seq] = splits.train_users[ui];
        if (seq.size() < 2) continue;
        positions.resize(seq.size() - 1);
        for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i + 1;
        const std::size_t take = std::min(targets, positions.size());
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + rng.uniform_index(positions.size() - i);
            std::swap(positions[i], positions[j]);
        }
        for (std::size_t i = 0; i < take; ++i) {
            TrainExample ex;
            ex.history.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(positions[i]));
            ex.positive = seq[positions[i]];
            ex.negatives = sample_negatives(corpus, user_positives[ui], negatives, rng);
            examples.push_back(std::move(ex));
        }
    }
    rng.shuffle(examples);
    return examples;
}

inline double recall_at_k(const std::vector<std::uint32_t>& topk, std::uint32_t target) {
    for (const std::uint32_t item : topk) {
        if (item == target) return 1.0;
    }
    return 0.0;
}

}  // namespace detail

struct SparCodeTrainResult {
    SparCodeModel<float> model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
};

inline SparCodeTrainResult train_sparcode(const Splits& splits, ModelConfig mcfg,
                                          const TrainConfig& tcfg) {
    tcfg.validate();
    mcfg.validate();
    if (splits.train_users.empty()) throw DataError("train: no training users");

    SparCodeModel<float> model = make_model<float>(mcfg, tcfg.seed);
    Rng rng(tcfg.seed + 0x9E3779B97F4A7C15ULL);

    std::vector<std::uint32_t> corpus(mcfg.num_items);
    for (std::uint32_t i = 0; i < corpus.size(); ++i) corpus[i] = i;
    std::vector<std::unordered_set<std::uint32_t>> user_positives;
    user_positives.reserve(splits.train_users.size());
    for (const auto& [user, seq] : splits.train_users) {
        user_positives.emplace_back(seq.begin(), seq.end());
    }

    auto params = model_parameters(model);
    auto adam = make_adam_state<float>(params, static_cast<float>(tcfg.lr));

    SparCodeTrainResult result;
    double best_recall = -1.0;
    bool codebooks_initialized = false;

    for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        auto examples = detail::draw_epoch_examples(splits, corpus, user_positives,
                                                    tcfg.targets_per_user,
                                                    tcfg.loss.negatives_per_positive, rng);
        if (examples.empty()) throw DataError("train: no training examples");

        double match_sum = 0.0, commit_sum = 0.0;
        std::size_t batch_start = 0, batch_index = 0;
        while (batch_start < examples.size()) {
            const std::size_t batch_end = std::min(examples.size(), batch_start + tcfg.batch_size);
            const std::size_t batch_n = batch_end - batch_start;

            if (!codebooks_initialized) {
                std::vector<std::vector<float>> sample_tokens;
                for (std::size_t e = batch_start; e < batch_end; ++e) {
                    const Matrix<float> toks = model.query_token_matrix(
                        std::span<const std::uint32_t>(examples[e].history));
                    for (std::size_t i = 0; i < toks.rows; ++i) {
                        auto row = toks.row(i);
                        sample_tokens.emplace_back(row.begin(), row.end());
                    }
                }
                reinit_from_samples(model.codebooks, sample_tokens, rng);
                codebooks_initialized = true;
            }

            SparCodeModel<float> grads = zeros_like(model);
            auto assign = make_assignments(model.codebooks);
            const float scale = 1.0f / static_cast<float>(batch_n);
            double batch_match = 0.0, batch_commit = 0.0;
            for (std::size_t e = batch_start; e < batch_end; ++e) {
                const auto losses = sparcode_example<float>(model, examples[e], tcfg.loss.lambda,
                                                            scale, &grads, &assign, tcfg.dropout,
                                                            &rng);
                batch_match += losses.match;
                batch_commit += losses.commit;
            }
            if (!std::isfinite(batch_match) || !std::isfinite(batch_commit)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_index) + " (match=" +
                                   fmt_number(batch_match) + ", commit=" + fmt_number(batch_commit) +
                                   ")");
            }
            if (tcfg.l2_embedding > 0.0) {
                const float two_l2 = static_cast<float>(2.0 * tcfg.l2_embedding);
                axpy(two_l2,
                     std::span<const float>(model.history_table.rows.data.data(),
                                            model.history_table.rows.data.size()),
                     std::span<float>(grads.history_table.rows.data.data(),
                                      grads.history_table.rows.data.size()));
                axpy(two_l2,
                     std::span<const float>(model.item_table.rows.data.data(),
                                            model.item_table.rows.data.size()),
                     std::span<float>(grads.item_table.rows.data.data(),
                                      grads.item_table.rows.data.size()));
            }
            auto grad_refs = model_parameters_const(grads);
            adam_step(params, grad_refs, adam);
            ema_update(model.codebooks, assign);

            match_sum += batch_match;
            commit_sum += batch_commit;
            batch_start = batch_end;
            ++batch_index;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.match = match_sum / static_cast<double>(examples.size());
        entry.commit = commit_sum / static_cast<double>(examples.size());
        entry.total = total_loss(entry.match, entry.commit, tcfg.loss.lambda);

        const std::size_t n_val = tcfg.val_users == 0
                                      ? splits.val.size()
                                      : std::min(tcfg.val_users, splits.val.size());
        if (n_val > 0) {
            const float serve_bias = model.train_bias(0);
            double hits = 0.0;
            for (std::size_t q = 0; q < n_val; ++q) {
                const auto& query = splits.val[q];
                const auto ranked = exhaustive_topk<float>(
                    model, std::span<const std::uint32_t>(query.history), tcfg.val_k, serve_bias);
                for (const auto& r : ranked.entries) {
                    if (r.item == query.target) {
                        hits += 1.0;
                        break;
                    }
                }
            }
            entry.val_recall = hits / static_cast<double>(n_val);
        }
        result.log.push_back(entry);
        if (entry.val_recall > best_recall) {
            best_recall = entry.val_recall;
            result.model = model;
            result.best_epoch = epoch;
        }
    }
    if (result.best_epoch == 0) {
        result.model = model;
        result.best_epoch = tcfg.epochs;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Two-tower baseline, trained with the identical example/negative budget.

template <typename T>
inline ExampleLosses two_tower_example(const TwoTowerModel<T>& model, const TrainExample& ex,
                                       T scale, TwoTowerModel<T>* grads, double dropout = 0.0,
                                       Rng* rng = nullptr) {
    MlpTrace<T> qtrace;
    const std::vector<T> qvec = model.query_vector(std::span<const std::uint32_t>(ex.history),
                                                   &qtrace, nullptr, dropout, rng);
    struct CandState {
        std::uint32_t item;
        MlpTrace<T> trace;
        std::vector<T> vec;
        double y;
    };
    std::vector<CandState> cands;
    cands.reserve(1 + ex.negatives.size());
    auto eval_candidate = [&](std::uint32_t item) {
        CandState c;
        c.item = item;
        c.vec = model.item_vector(item, &c.trace, dropout, rng);
        c.y = static_cast<double>(dot(std::span<const T>(qvec), std::span<const T>(c.vec)));
        cands.push_back(std::move(c));
    };
    eval_candidate(ex.positive);
    for (const std::uint32_t neg : ex.negatives) eval_candidate(neg);

    std::vector<double> y_negs;
    for (std::size_t c = 1; c < cands.size(); ++c) y_negs.push_back(cands[c].y);
    const double match = sampled_softmax_loss(cands[0].y, std::span<const double>(y_negs));

    if (grads) {
        double m = cands[0].y;
        for (const auto& c : cands) m = std::max(m, c.y);
        double denom = 0.0;
        for (const auto& c : cands) denom += std::exp(c.y - m);
        std::vector<T> d_qvec(qvec.size(), T(0));
        for (std::size_t ci = 0; ci < cands.size(); ++ci) {
            const auto& c = cands[ci];
            const T dy = scale * static_cast<T>(std::exp(c.y - m) / denom - (ci == 0 ? 1.0 : 0.0));
            axpy(dy, std::span<const T>(c.vec.data(), c.vec.size()),
                 std::span<T>(d_qvec.data(), d_qvec.size()));
            std::vector<T> d_ivec(c.vec.size());
            for (std::size_t i = 0; i < d_ivec.size(); ++i) d_ivec[i] = dy * qvec[i];
            std::vector<T> d_pooled;
            mlp_backward(model.item_trunk, c.trace, std::span<const T>(d_ivec), grads->item_trunk,
                         &d_pooled);
            axpy(T(1), std::span<const T>(d_pooled.data(), d_pooled.size()),
                 grads->item_table.rows.row(c.item + 1));
        }
        std::vector<T> d_pooled_q;
        mlp_backward(model.query_trunk, qtrace, std::span<const T>(d_qvec), grads->query_trunk,
                     &d_pooled_q);
        const auto rows = model.history_rows(std::span<const std::uint32_t>(ex.history));
        auto& history_grads =
            model.cfg.tied_embeddings ? grads->item_table : grads->history_table;
        const T inv = T(1) / static_cast<T>(rows.size());
        for (const std::uint32_t row : rows) {
            if (row == 0) continue;  // frozen pad
            axpy(inv, std::span<const T>(d_pooled_q.data(), d_pooled_q.size()),
                 history_grads.rows.row(row));
        }
    }
    return {match, 0.0};
}

struct TwoTowerTrainResult {
    TwoTowerModel<float> model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
};

inline TwoTowerTrainResult train_two_tower(const Splits& splits, TwoTowerConfig mcfg,
                                           const TrainConfig& tcfg) {
    tcfg.validate();
    mcfg.validate();
    if (splits.train_users.empty()) throw DataError("train: no training users");

    TwoTowerModel<float> model = make_two_tower<float>(mcfg, tcfg.seed);
    Rng rng(tcfg.seed + 0x9E3779B97F4A7C15ULL);

    std::vector<std::uint32_t> corpus(mcfg.num_items);
    for (std::uint32_t i = 0; i < corpus.size(); ++i) corpus[i] = i;
    std::vector<std::unordered_set<std::uint32_t>> user_positives;
    for (const auto& [user, seq] : splits.train_users) {
        user_positives.emplace_back(seq.begin(), seq.end());
    }

    auto params = two_tower_parameters(model);
    auto adam = make_adam_state<float>(params, static_cast<float>(tcfg.lr));

    TwoTowerTrainResult result;
    double best_recall = -1.0;
    for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        auto examples = detail::draw_epoch_examples(splits, corpus, user_positives,
                                                    tcfg.targets_per_user,
                                                    tcfg.loss.negatives_per_positive, rng);
        if (examples.empty()) throw DataError("train: no training examples");
        double match_sum = 0.0;
        std::size_t batch_start = 0, batch_index = 0;
        while (batch_start < examples.size()) {
            const std::size_t batch_end = std::min(examples.size(), batch_start + tcfg.batch_size);
            const std::size_t batch_n = batch_end - batch_start;
            TwoTowerModel<float> grads = zeros_like(model);
            const float scale = 1.0f / static_cast<float>(batch_n);
            double batch_match = 0.0;
            for (std::size_t e = batch_start; e < batch_end; ++e) {
                batch_match += two_tower_example<float>(model, examples[e], scale, &grads,
                                                        tcfg.dropout, &rng)
                                   .match;
            }
            if (!std::isfinite(batch_match)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_index));
            }
            if (tcfg.l2_embedding > 0.0) {
                const float two_l2 = static_cast<float>(2.0 * tcfg.l2_embedding);
                axpy(two_l2,
                     std::span<const float>(model.history_table.rows.data.data(),
                                            model.history_table.rows.data.size()),
                     std::span<float>(grads.history_table.rows.data.data(),
                                      grads.history_table.rows.data.size()));
                axpy(two_l2,
                     std::span<const float>(model.item_table.rows.data.data(),
                                            model.item_table.rows.data.size()),
                     std::span<float>(grads.item_table.rows.data.data(),
                                      grads.item_table.rows.data.size()));
            }
            auto grad_refs = [&] {
                std::vector<ParamRef<const float>> out;
                for (auto& p : two_tower_parameters(grads)) out.push_back({p.name, p.data, p.size});
                return out;
            }();
            adam_step(params, grad_refs, adam);
            match_sum += batch_match;
            batch_start = batch_end;
            ++batch_index;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.match = match_sum / static_cast<double>(examples.size());
        entry.total = entry.match;

        const std::size_t n_val = tcfg.val_users == 0
                                      ? splits.val.size()
                                      : std::min(tcfg.val_users, splits.val.size());
        if (n_val > 0) {
            const Matrix<float> item_matrix = two_tower_item_matrix(model);
            double hits = 0.0;
            for (std::size_t q = 0; q < n_val; ++q) {
                const auto& query = splits.val[q];
                const auto qvec = model.query_vector(std::span<const std::uint32_t>(query.history));
                const auto ranked =
                    twotower_topk<float>(std::span<const float>(qvec), item_matrix, tcfg.val_k);
                for (const auto& r : ranked.entries) {
                    if (r.item == query.target) {
                        hits += 1.0;
                        break;
                    }
                }
            }
            entry.val_recall = hits / static_cast<double>(n_val);
        }
        result.log.push_back(entry);
        if (entry.val_recall > best_recall) {
            best_recall = entry.val_recall;
            result.model = model;
            result.best_epoch = epoch;
        }
    }
    if (result.best_epoch == 0) {
        result.model = model;
        result.best_epoch = tcfg.epochs;
    }
    return result;
}

}  // namespace sparcode
