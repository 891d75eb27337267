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

// Built-in verification suites shared by the `selftest` subcommand, the unit
// tests, and the acceptance harness:
//   - gradient suite: analytic backprop vs. the central-difference oracle in
//     double precision, for every trainable parameter of tokenizers, all five
//     scorer kinds, and the bias b;
//   - quantizer suite: idempotence, code cardinality, the EMA recurrence, and
//     the optimizer/EMA parameter partition;
//   - oracle equivalence: index-based retrieval vs. exhaustive scoring.

#pragma once

#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sparcode/gradcheck.hpp"
#include "sparcode/indexer.hpp"
#include "sparcode/model.hpp"
#include "sparcode/retriever.hpp"
#include "sparcode/trainer.hpp"

namespace sparcode::selfcheck {

struct GradientSuiteResult {
    bool pass = false;
    double worst_rel_err = 0.0;
    std::string worst_param;
    std::size_t checked_values = 0;
    std::size_t draws = 0;
    std::size_t skipped_draws = 0;  // resampled near a kink / quantization boundary
};

namespace detail {

inline ModelConfig toy_config(InteractionKind kind) {
    ModelConfig cfg;
    cfg.embed_dim = 4;
    cfg.token_dim = 4;
    cfg.query_tokens = 2;
    cfg.item_tokens = 2;
    cfg.num_books = 2;
    cfg.num_words = 4;
    cfg.gamma = 0.9;
    cfg.max_history = 6;
    cfg.kind = kind;
    cfg.scorer_hidden = {5};
    cfg.tokenizer_hidden = {5};
    cfg.per_token_bias = false;
    cfg.tied_embeddings = false;  // exercise the separate history table too
    cfg.identity_init = false;
    cfg.num_items = 12;
    return cfg;
}

inline TrainExample random_example(const ModelConfig& cfg, Rng& rng) {
    TrainExample ex;
    const std::size_t hist_len = 2 + rng.uniform_index(3);
    for (std::size_t i = 0; i < hist_len; ++i) {
        ex.history.push_back(static_cast<std::uint32_t>(rng.uniform_index(cfg.num_items)));
    }
    ex.positive = static_cast<std::uint32_t>(rng.uniform_index(cfg.num_items));
    for (std::size_t i = 0; i < 3; ++i) {
        ex.negatives.push_back(static_cast<std::uint32_t>(rng.uniform_index(cfg.num_items)));
    }
    return ex;
}

// Finite differences probe the smooth piece of the loss; reject draws that
// sit within `margin` of any kink: a hidden ReLU pre-activation, the sparse
// score threshold, a MaxSim argmax switch, or a codeword-assignment boundary.
inline bool relu_pres_clear(const MlpTrace<double>& trace, const Mlp<double>& mlp, double margin) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        if (mlp.layers[l].act != Activation::relu) continue;
        for (const double pre : trace.pre[l]) {
            if (std::fabs(pre) < margin) return false;
        }
    }
    return true;
}

inline bool example_is_smooth(const SparCodeModel<double>& model, const TrainExample& ex,
                              double margin) {
    TokenizerTrace<double> qtrace;
    const Matrix<double> qtokens =
        model.query_token_matrix(std::span<const std::uint32_t>(ex.history), &qtrace);
    if (!relu_pres_clear(qtrace.trunk, model.query_tokenizer.trunk, margin)) return false;
    const auto quant = model.quantize_tokens(qtokens);
    for (std::size_t i = 0; i < qtokens.rows; ++i) {
        for (std::size_t b = 0; b < model.codebooks.num_books; ++b) {
            auto sub = std::span<const double>(qtokens.row(i))
                           .subspan(b * model.codebooks.sub_dim, model.codebooks.sub_dim);
            const std::uint32_t best = quant[i].code[b];
            const double best_d =
                squared_distance(std::span<const double>(model.codebooks.words[b].row(best)), sub);
            for (std::uint32_t k = 0; k < model.codebooks.num_words; ++k) {
                if (k == best) continue;
                const double d = squared_distance(
                    std::span<const double>(model.codebooks.words[b].row(k)), sub);
                if (d - best_d < margin) return false;
            }
        }
    }
    std::vector<std::uint32_t> cands{ex.positive};
    cands.insert(cands.end(), ex.negatives.begin(), ex.negatives.end());
    for (const std::uint32_t item : cands) {
        TokenizerTrace<double> ttrace;
        const Matrix<double> tokens = model.item_token_matrix(item, &ttrace);
        if (!relu_pres_clear(ttrace.trunk, model.item_tokenizer.trunk, margin)) return false;
        for (std::size_t i = 0; i < qtokens.rows; ++i) {
            ScorerTrace<double> strace;
            const double s = interaction_score(std::span<const double>(quant[i].embedding), tokens,
                                               model.scorer, &strace);
            if (std::fabs(s + model.train_bias(i)) < margin) return false;
            if ((model.scorer.kind == InteractionKind::dnn ||
                 model.scorer.kind == InteractionKind::inner_pdnn) &&
                !relu_pres_clear(strace.mlp, model.scorer.mlp, margin)) {
                return false;
            }
            if (model.scorer.kind == InteractionKind::maxsim) {
                std::vector<double> dots(tokens.rows);
                for (std::size_t j = 0; j < tokens.rows; ++j) {
                    dots[j] = dot(std::span<const double>(quant[i].embedding),
                                  std::span<const double>(tokens.row(j)));
                }
                std::sort(dots.begin(), dots.end());
                if (tokens.rows > 1 && dots[tokens.rows - 1] - dots[tokens.rows - 2] < margin) {
                    return false;
                }
            }
        }
    }
    return true;
}

}  // namespace detail

// One scorer kind: `draws` random (model, example) pairs, every trainable
// parameter checked against central differences (h, double precision).
inline GradientSuiteResult gradient_suite_for_kind(InteractionKind kind, std::size_t draws,
                                                   std::uint64_t seed, double h = 1e-5,
                                                   double tolerance = 1e-4) {
    const ModelConfig cfg = detail::toy_config(kind);
    const double lambda = 0.3;
    const double l2 = 1e-4;
    GradientSuiteResult result;
    result.pass = true;

    std::uint64_t draw_seed = seed;
    for (std::size_t d = 0; d < draws; ++d) {
        SparCodeModel<double> model = make_model<double>(cfg, draw_seed);
        Rng rng(draw_seed + 7777);
        TrainExample ex = detail::random_example(cfg, rng);
        // The train bias starts at 0, exactly on the ReLU threshold when S=0;
        // give it a generic value the way training immediately would.
        for (auto& b : model.scorer.bias) b = rng.uniform(-0.2, 0.2);
        ++draw_seed;
        if (!detail::example_is_smooth(model, ex, 1e-3)) {
            ++result.skipped_draws;
            if (result.skipped_draws > 50 * draws) {
                result.pass = false;
                result.worst_param = "too many non-smooth draws (" + interaction_kind_name(kind) + ")";
                break;
            }
            --d;  // retry with the next seed
            continue;
        }
        ++result.draws;

        std::vector<TrainExample> examples{ex};
        SparCodeModel<double> grads = zeros_like(model);
        sparcode_batch_gradients<double>(model, std::span<const TrainExample>(examples), lambda, l2,
                                         grads);

        auto param_refs = model_parameters(model);
        auto grad_refs = model_parameters(grads);
        std::vector<double> x0;
        for (const auto& p : param_refs) x0.insert(x0.end(), p.data, p.data + p.size);

        auto apply = [&](std::span<const double> x) {
            std::size_t off = 0;
            for (auto& p : param_refs) {
                for (std::size_t i = 0; i < p.size; ++i) p.data[i] = x[off + i];
                off += p.size;
            }
        };
        auto f = [&](std::span<const double> x) {
            apply(x);
            return sparcode_batch_objective<double>(model, std::span<const TrainExample>(examples),
                                                    lambda, l2);
        };
        const auto fd = finite_difference_gradient(f, x0, h);
        apply(std::span<const double>(x0));

        std::size_t off = 0;
        for (std::size_t b = 0; b < grad_refs.size(); ++b) {
            for (std::size_t i = 0; i < grad_refs[b].size; ++i) {
                // Floor 1e-4: below that gradient magnitude the criterion is
                // |analytic - fd| < 1e-8, far above central-difference noise
                // (~1e-11 here) and far below any real disagreement.
                const double rel = relative_error(grad_refs[b].data[i], fd[off + i], 1e-4);
                ++result.checked_values;
                if (rel > result.worst_rel_err) {
                    result.worst_rel_err = rel;
                    result.worst_param = grad_refs[b].name + "[" + std::to_string(i) + "] (" +
                                         interaction_kind_name(kind) + ")";
                }
                if (rel > tolerance) result.pass = false;
            }
            off += grad_refs[b].size;
        }
    }
    return result;
}

inline GradientSuiteResult gradient_suite(std::size_t draws_per_kind, std::uint64_t seed) {
    GradientSuiteResult total;
    total.pass = true;
    for (const auto kind :
         {InteractionKind::dot_product, InteractionKind::maxsim, InteractionKind::crossnet,
          InteractionKind::dnn, InteractionKind::inner_pdnn}) {
        const auto r = gradient_suite_for_kind(kind, draws_per_kind, seed + 100 * static_cast<int>(kind));
        total.pass = total.pass && r.pass;
        total.checked_values += r.checked_values;
        total.draws += r.draws;
        total.skipped_draws += r.skipped_draws;
        if (r.worst_rel_err > total.worst_rel_err) {
            total.worst_rel_err = r.worst_rel_err;
            total.worst_param = r.worst_param;
        }
    }
    return total;
}

// The sg[.] contract: perturbing a codeword moves the score, yet codewords
// carry no analytic gradient and an optimizer step must leave them
// bit-identical.
struct StopGradientResult {
    bool score_moves = false;
    bool codewords_untouched_by_adam = false;
    bool pass = false;
};

inline StopGradientResult stop_gradient_check(std::uint64_t seed) {
    const ModelConfig cfg = detail::toy_config(InteractionKind::inner_pdnn);
    SparCodeModel<double> model = make_model<double>(cfg, seed);
    Rng rng(seed + 1);
    const TrainExample ex = detail::random_example(cfg, rng);
    std::vector<TrainExample> examples{ex};

    StopGradientResult result;
    const double base = sparcode_batch_objective<double>(
        model, std::span<const TrainExample>(examples), 0.3, 0.0);
    // Perturb the codeword actually selected for the first query token.
    const Matrix<double> qtokens = model.query_token_matrix(std::span<const std::uint32_t>(ex.history));
    const auto quant = model.quantize_tokens(qtokens);
    const std::uint32_t word = quant[0].code[0];
    model.codebooks.words[0].at(word, 0) += 1e-3;
    const double moved = sparcode_batch_objective<double>(
        model, std::span<const TrainExample>(examples), 0.3, 0.0);
    model.codebooks.words[0].at(word, 0) -= 1e-3;
    result.score_moves = std::fabs(moved - base) > 0.0;

    // A full gradient + Adam step must not move any codeword bit.
    const auto words_before = model.codebooks.words;
    SparCodeModel<double> grads = zeros_like(model);
    sparcode_batch_gradients<double>(model, std::span<const TrainExample>(examples), 0.3, 1e-4, grads);
    auto params = model_parameters(model);
    auto grad_refs = model_parameters_const(grads);
    auto adam = make_adam_state<double>(params, 0.01);
    adam_step(params, grad_refs, adam);
    result.codewords_untouched_by_adam = true;
    for (std::size_t b = 0; b < model.codebooks.num_books; ++b) {
        if (model.codebooks.words[b].data != words_before[b].data) {
            result.codewords_untouched_by_adam = false;
        }
    }
    result.pass = result.score_moves && result.codewords_untouched_by_adam;
    return result;
}

struct QuantizerSuiteResult {
    bool idempotent = false;
    bool cardinality_ok = false;
    bool ratio_invariant_ok = false;
    bool ema_example_ok = false;
    std::size_t distinct_codes = 0;
    bool pass = false;
};

inline QuantizerSuiteResult quantizer_suite(std::size_t tokens, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t m = 2, n = 4, sub = 3;
    auto cb = make_codebooks<double>(m, n, sub, 0.9, rng);

    QuantizerSuiteResult result;
    result.idempotent = true;
    std::set<Code> seen;
    for (std::size_t t = 0; t < tokens; ++t) {
        std::vector<double> token(m * sub);
        for (auto& v : token) v = rng.normal();
        const auto q = quantize(std::span<const double>(token), cb);
        const auto q2 = quantize(std::span<const double>(q.embedding), cb);
        if (q2.code != q.code) result.idempotent = false;
        seen.insert(q.code);
    }
    result.distinct_codes = seen.size();
    std::size_t grid = 1;
    for (std::size_t b = 0; b < m; ++b) grid *= n;
    result.cardinality_ok = seen.size() <= grid;

    // A few EMA rounds with random assignments; the ratio invariant must hold
    // exactly after each one.
    result.ratio_invariant_ok = true;
    for (int round = 0; round < 5; ++round) {
        auto assign = make_assignments(cb);
        for (int a = 0; a < 6; ++a) {
            std::vector<double> token(m * sub);
            for (auto& v : token) v = rng.normal();
            record_assignment(assign, cb, quantize(std::span<const double>(token), cb));
        }
        ema_update(cb, assign);
        for (std::size_t b = 0; b < m; ++b) {
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t c = 0; c < sub; ++c) {
                    if (cb.words[b].at(k, c) != cb.accum[b].at(k, c) / cb.counts.at(b, k)) {
                        result.ratio_invariant_ok = false;
                    }
                }
            }
        }
    }

    // Hand application of the recurrence: gamma=0.5, prior count 1, prior
    // accumulator [0], assigned {[1],[3]} -> count 1.5, accumulator [2],
    // codeword 4/3.
    {
        Rng r2(seed + 1);
        auto cb2 = make_codebooks<double>(1, 1, 1, 0.5, r2);
        cb2.words[0].at(0, 0) = 0.0;
        cb2.accum[0].at(0, 0) = 0.0;
        cb2.counts.at(0, 0) = 1.0;
        auto assign = make_assignments(cb2);
        assign.counts.at(0, 0) = 2.0;
        assign.sums[0].at(0, 0) = 4.0;  // 1 + 3
        ema_update(cb2, assign);
        result.ema_example_ok = std::fabs(cb2.counts.at(0, 0) - 1.5) < 1e-9 &&
                                std::fabs(cb2.accum[0].at(0, 0) - 2.0) < 1e-9 &&
                                std::fabs(cb2.words[0].at(0, 0) - 4.0 / 3.0) < 1e-9;
    }
    result.pass = result.idempotent && result.cardinality_ok && result.ratio_invariant_ok &&
                  result.ema_example_ok;
    return result;
}

struct OracleEquivalenceResult {
    std::size_t queries = 0;
    std::size_t comparisons = 0;
    std::size_t mismatches = 0;
    bool pass = false;
};

// retrieve_topk on a full-grid index must equal exhaustive_topk exactly:
// same items, same order, same scores.
template <typename T>
inline OracleEquivalenceResult oracle_equivalence(
    const SparCodeModel<T>& model, const std::vector<std::vector<std::uint32_t>>& queries,
    std::span<const std::size_t> ks, std::span<const T> serve_biases, std::size_t workers = 1,
    std::size_t cap = std::size_t(1) << 20) {
    OracleEquivalenceResult result;
    result.queries = queries.size();
    std::vector<std::uint32_t> items(model.cfg.num_items);
    for (std::uint32_t i = 0; i < items.size(); ++i) items[i] = i;
    const auto codes = enumerate_full_grid(model.cfg.num_books, model.cfg.num_words, cap);
    for (const T bias : serve_biases) {
        const auto index = build_index(model, std::span<const std::uint32_t>(items), bias, codes,
                                       workers);
        for (const auto& history : queries) {
            const auto query_codes =
                query_to_codes(model, std::span<const std::uint32_t>(history));
            for (const std::size_t k : ks) {
                const auto via_index = retrieve_topk(query_codes, index, k);
                const auto via_oracle = exhaustive_topk<T>(
                    model, std::span<const std::uint32_t>(history), k, bias);
                ++result.comparisons;
                if (via_index.entries.size() != via_oracle.entries.size()) {
                    ++result.mismatches;
                    continue;
                }
                bool same = true;
                for (std::size_t i = 0; i < via_index.entries.size(); ++i) {
                    if (via_index.entries[i].item != via_oracle.entries[i].item ||
                        via_index.entries[i].score != via_oracle.entries[i].score) {
                        same = false;
                        break;
                    }
                }
                if (!same) ++result.mismatches;
            }
        }
    }
    result.pass = result.mismatches == 0;
    return result;
}

}  // namespace sparcode::selfcheck
