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

// Run configuration: flat `key = value` text with dotted sections, layered
// resolution (defaults < file < CLI overrides), unknown keys rejected. The
// resolved config echo re-parses to an equal RunConfig.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sparcode/dataset.hpp"
#include "sparcode/error.hpp"
#include "sparcode/indexer.hpp"
#include "sparcode/io.hpp"
#include "sparcode/model.hpp"
#include "sparcode/trainer.hpp"
#include "sparcode/two_tower.hpp"

namespace sparcode {

struct RunConfig {
    // model
    std::size_t model_d = 16;        // D
    std::size_t model_d_t = 0;       // D^T; 0 means "equal to D"
    std::size_t model_k_u = 2;
    std::size_t model_k_c = 2;
    std::size_t model_m = 2;
    std::size_t model_n = 256;
    double model_gamma = 0.99;
    double model_lambda = 0.25;
    // scorer
    std::string scorer_kind = "inner_pdnn";
    std::vector<std::size_t> scorer_hidden{256, 256, 256};
    bool scorer_per_token_bias = false;
    bool model_tied_embeddings = true;
    // tokenizer
    std::vector<std::size_t> tokenizer_hidden;
    bool tokenizer_identity_init = true;
    double tokenizer_head_jitter = 0.5;
    std::size_t tokenizer_max_history = 20;
    // train
    double train_lr = 0.001;
    std::size_t train_epochs = 5;
    std::size_t train_batch_size = 128;
    std::uint64_t train_seed = 42;
    double train_l2_embedding = 1e-6;
    double train_dropout = 0.1;
    std::size_t train_negatives = 50;
    std::size_t train_targets_per_user = 4;
    std::size_t train_val_users = 0;
    // data
    std::string data_path;
    std::size_t data_num_users = 2000;
    std::size_t data_num_items = 500;
    std::size_t data_latent_dim = 16;
    std::size_t data_interactions_per_user = 12;
    double data_alpha = 1.0;
    double data_tau = 0.3;
    std::uint64_t data_seed = 42;
    bool data_write_truth = true;
    std::string data_split = "leave_last_out";
    std::vector<double> data_ratios{0.8, 0.1, 0.1};
    // index
    std::string index_policy = "full_grid";
    std::size_t index_cap = 1048576;  // 2^20 full-grid cap
    std::size_t index_top_l = 0;      // 0 = no per-code truncation
    std::string index_serve_bias = "trained";
    // eval
    std::vector<std::size_t> eval_ks{5, 10, 50};
    std::vector<double> eval_bias_grid;
    std::vector<double> eval_sparsity_targets;
    std::size_t eval_repeats = 3;
    std::size_t eval_k = 10;

    bool operator==(const RunConfig&) const = default;

    std::size_t token_dim() const { return model_d_t == 0 ? model_d : model_d_t; }

    // "trained" -> nullopt; otherwise a fixed serve bias.
    std::optional<double> serve_bias_override() const {
        if (index_serve_bias == "trained") return std::nullopt;
        return parse_number<double>(index_serve_bias, "index.serve_bias");
    }
};

namespace cfgdetail {

inline std::string list_to_string(const std::vector<std::size_t>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out + "]";
}

inline std::string list_to_string(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt_number(v[i]);
    }
    return out + "]";
}

inline std::string_view strip_brackets(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
        return trim(s.substr(1, s.size() - 2));
    }
    return s;
}

template <typename T>
inline std::vector<T> parse_list(std::string_view s, const std::string& key) {
    std::vector<T> out;
    auto body = strip_brackets(s);
    if (body.empty()) return out;
    for (auto tok : split(body, ',')) {
        out.push_back(parse_number<T>(trim(tok), key));
    }
    return out;
}

inline bool parse_bool(std::string_view s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + std::string(s) + "'");
}

}  // namespace cfgdetail

inline void config_set(RunConfig& cfg, const std::string& key, std::string_view value) {
    using namespace cfgdetail;
    const std::string v(trim(value));
    if (key == "model.D") cfg.model_d = parse_number<std::size_t>(v, key);
    else if (key == "model.D_T") cfg.model_d_t = parse_number<std::size_t>(v, key);
    else if (key == "model.K_u") cfg.model_k_u = parse_number<std::size_t>(v, key);
    else if (key == "model.K_c") cfg.model_k_c = parse_number<std::size_t>(v, key);
    else if (key == "model.M") cfg.model_m = parse_number<std::size_t>(v, key);
    else if (key == "model.N") cfg.model_n = parse_number<std::size_t>(v, key);
    else if (key == "model.gamma") cfg.model_gamma = parse_number<double>(v, key);
    else if (key == "model.tied_embeddings") cfg.model_tied_embeddings = parse_bool(v, key);
    else if (key == "model.lambda") cfg.model_lambda = parse_number<double>(v, key);
    else if (key == "scorer.kind") cfg.scorer_kind = v;
    else if (key == "scorer.hidden") cfg.scorer_hidden = parse_list<std::size_t>(v, key);
    else if (key == "scorer.per_token_bias") cfg.scorer_per_token_bias = parse_bool(v, key);
    else if (key == "tokenizer.hidden") cfg.tokenizer_hidden = parse_list<std::size_t>(v, key);
    else if (key == "tokenizer.identity_init") cfg.tokenizer_identity_init = parse_bool(v, key);
    else if (key == "tokenizer.head_jitter") cfg.tokenizer_head_jitter = parse_number<double>(v, key);
    else if (key == "tokenizer.max_history") cfg.tokenizer_max_history = parse_number<std::size_t>(v, key);
    else if (key == "train.lr") cfg.train_lr = parse_number<double>(v, key);
    else if (key == "train.epochs") cfg.train_epochs = parse_number<std::size_t>(v, key);
    else if (key == "train.batch_size") cfg.train_batch_size = parse_number<std::size_t>(v, key);
    else if (key == "train.seed") cfg.train_seed = parse_number<std::uint64_t>(v, key);
    else if (key == "train.l2_embedding") cfg.train_l2_embedding = parse_number<double>(v, key);
    else if (key == "train.dropout") cfg.train_dropout = parse_number<double>(v, key);
    else if (key == "train.negatives") cfg.train_negatives = parse_number<std::size_t>(v, key);
    else if (key == "train.targets_per_user") cfg.train_targets_per_user = parse_number<std::size_t>(v, key);
    else if (key == "train.val_users") cfg.train_val_users = parse_number<std::size_t>(v, key);
    else if (key == "data.path") cfg.data_path = v;
    else if (key == "data.num_users") cfg.data_num_users = parse_number<std::size_t>(v, key);
    else if (key == "data.num_items") cfg.data_num_items = parse_number<std::size_t>(v, key);
    else if (key == "data.latent_dim") cfg.data_latent_dim = parse_number<std::size_t>(v, key);
    else if (key == "data.interactions_per_user") cfg.data_interactions_per_user = parse_number<std::size_t>(v, key);
    else if (key == "data.alpha") cfg.data_alpha = parse_number<double>(v, key);
    else if (key == "data.tau") cfg.data_tau = parse_number<double>(v, key);
    else if (key == "data.seed") cfg.data_seed = parse_number<std::uint64_t>(v, key);
    else if (key == "data.write_truth") cfg.data_write_truth = parse_bool(v, key);
    else if (key == "data.split") cfg.data_split = v;
    else if (key == "data.ratios") cfg.data_ratios = parse_list<double>(v, key);
    else if (key == "index.policy") cfg.index_policy = v;
    else if (key == "index.cap") cfg.index_cap = parse_number<std::size_t>(v, key);
    else if (key == "index.top_l") cfg.index_top_l = parse_number<std::size_t>(v, key);
    else if (key == "index.serve_bias") cfg.index_serve_bias = v;
    else if (key == "eval.ks") cfg.eval_ks = parse_list<std::size_t>(v, key);
    else if (key == "eval.bias_grid") cfg.eval_bias_grid = parse_list<double>(v, key);
    else if (key == "eval.sparsity_targets") cfg.eval_sparsity_targets = parse_list<double>(v, key);
    else if (key == "eval.repeats") cfg.eval_repeats = parse_number<std::size_t>(v, key);
    else if (key == "eval.k") cfg.eval_k = parse_number<std::size_t>(v, key);
    else throw ConfigError("unknown key: " + key);
}

inline void config_validate(const RunConfig& cfg) {
    const std::size_t dt = cfg.token_dim();
    if (cfg.model_m == 0 || cfg.model_n == 0) throw ConfigError("config: model.M and model.N must be >= 1");
    if (dt % cfg.model_m != 0) {
        throw ConfigError("config: D_T % M == 0 violated (D_T=" + std::to_string(dt) +
                          ", M=" + std::to_string(cfg.model_m) + ")");
    }
    if (cfg.model_k_u == 0 || cfg.model_k_c == 0) {
        throw ConfigError("config: model.K_u and model.K_c must be >= 1");
    }
    if (!(cfg.model_gamma > 0.0 && cfg.model_gamma < 1.0)) {
        throw ConfigError("config: model.gamma must be in (0,1)");
    }
    if (cfg.model_lambda < 0.0) throw ConfigError("config: model.lambda must be >= 0");
    (void)interaction_kind_from_name(cfg.scorer_kind);
    if (cfg.tokenizer_max_history == 0) throw ConfigError("config: tokenizer.max_history must be >= 1");
    if (cfg.train_batch_size == 0) throw ConfigError("config: train.batch_size must be >= 1");
    if (!(cfg.train_dropout >= 0.0 && cfg.train_dropout < 1.0)) {
        throw ConfigError("config: train.dropout must be in [0,1)");
    }
    if (cfg.train_negatives == 0) throw ConfigError("config: train.negatives must be >= 1");
    if (cfg.data_ratios.size() != 3) throw ConfigError("config: data.ratios must have 3 entries");
    {
        const double sum = cfg.data_ratios[0] + cfg.data_ratios[1] + cfg.data_ratios[2];
        if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("config: data.ratios must sum to 1");
    }
    (void)split_mode_from_name(cfg.data_split);
    if (cfg.data_latent_dim == 0 || cfg.data_latent_dim % 2 != 0) {
        throw ConfigError("config: data.latent_dim must be even and > 0");
    }
    if (cfg.data_alpha < 0.0) throw ConfigError("config: data.alpha must be >= 0");
    if (!(cfg.data_tau > 0.0)) throw ConfigError("config: data.tau must be > 0");
    (void)code_policy_from_name(cfg.index_policy);
    (void)cfg.serve_bias_override();
    if (cfg.eval_ks.empty()) throw ConfigError("config: eval.ks must not be empty");
    for (const std::size_t k : cfg.eval_ks) {
        if (k == 0) throw ConfigError("config: eval.ks entries must be >= 1");
    }
    for (const double t : cfg.eval_sparsity_targets) {
        if (!(t >= 0.0 && t < 1.0)) {
            throw ConfigError("config: eval.sparsity_targets must be in [0,1)");
        }
    }
    if (cfg.eval_repeats == 0) throw ConfigError("config: eval.repeats must be >= 1");
    if (cfg.eval_k == 0) throw ConfigError("config: eval.k must be >= 1");
}

// Canonical echo; writing this string to config.resolved and re-parsing it
// yields an equal RunConfig.
inline std::string config_serialize(const RunConfig& cfg) {
    using namespace cfgdetail;
    std::ostringstream os;
    os << "model.D = " << cfg.model_d << '\n';
    os << "model.D_T = " << cfg.model_d_t << '\n';
    os << "model.K_u = " << cfg.model_k_u << '\n';
    os << "model.K_c = " << cfg.model_k_c << '\n';
    os << "model.M = " << cfg.model_m << '\n';
    os << "model.N = " << cfg.model_n << '\n';
    os << "model.gamma = " << fmt_number(cfg.model_gamma) << '\n';
    os << "model.tied_embeddings = " << (cfg.model_tied_embeddings ? "true" : "false") << '\n';
    os << "model.lambda = " << fmt_number(cfg.model_lambda) << '\n';
    os << "scorer.kind = " << cfg.scorer_kind << '\n';
    os << "scorer.hidden = " << list_to_string(cfg.scorer_hidden) << '\n';
    os << "scorer.per_token_bias = " << (cfg.scorer_per_token_bias ? "true" : "false") << '\n';
    os << "tokenizer.hidden = " << list_to_string(cfg.tokenizer_hidden) << '\n';
    os << "tokenizer.identity_init = " << (cfg.tokenizer_identity_init ? "true" : "false") << '\n';
    os << "tokenizer.head_jitter = " << fmt_number(cfg.tokenizer_head_jitter) << '\n';
    os << "tokenizer.max_history = " << cfg.tokenizer_max_history << '\n';
    os << "train.lr = " << fmt_number(cfg.train_lr) << '\n';
    os << "train.epochs = " << cfg.train_epochs << '\n';
    os << "train.batch_size = " << cfg.train_batch_size << '\n';
    os << "train.seed = " << cfg.train_seed << '\n';
    os << "train.l2_embedding = " << fmt_number(cfg.train_l2_embedding) << '\n';
    os << "train.dropout = " << fmt_number(cfg.train_dropout) << '\n';
    os << "train.negatives = " << cfg.train_negatives << '\n';
    os << "train.targets_per_user = " << cfg.train_targets_per_user << '\n';
    os << "train.val_users = " << cfg.train_val_users << '\n';
    os << "data.path = " << cfg.data_path << '\n';
    os << "data.num_users = " << cfg.data_num_users << '\n';
    os << "data.num_items = " << cfg.data_num_items << '\n';
    os << "data.latent_dim = " << cfg.data_latent_dim << '\n';
    os << "data.interactions_per_user = " << cfg.data_interactions_per_user << '\n';
    os << "data.alpha = " << fmt_number(cfg.data_alpha) << '\n';
    os << "data.tau = " << fmt_number(cfg.data_tau) << '\n';
    os << "data.seed = " << cfg.data_seed << '\n';
    os << "data.write_truth = " << (cfg.data_write_truth ? "true" : "false") << '\n';
    os << "data.split = " << cfg.data_split << '\n';
    os << "data.ratios = " << list_to_string(cfg.data_ratios) << '\n';
    os << "index.policy = " << cfg.index_policy << '\n';
    os << "index.cap = " << cfg.index_cap << '\n';
    os << "index.top_l = " << cfg.index_top_l << '\n';
    os << "index.serve_bias = " << cfg.index_serve_bias << '\n';
    os << "eval.ks = " << list_to_string(cfg.eval_ks) << '\n';
    os << "eval.bias_grid = " << list_to_string(cfg.eval_bias_grid) << '\n';
    os << "eval.sparsity_targets = " << list_to_string(cfg.eval_sparsity_targets) << '\n';
    os << "eval.repeats = " << cfg.eval_repeats << '\n';
    os << "eval.k = " << cfg.eval_k << '\n';
    return os.str();
}

inline void config_apply_text(RunConfig& cfg, const std::string& text, const std::string& context) {
    std::size_t lineno = 0;
    for (auto raw : split(text, '\n')) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(context + " line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        config_set(cfg, key, line.substr(eq + 1));
    }
}

// defaults < file < overrides ("key=value" strings).
inline RunConfig parse_config(const std::string& file_path,
                              const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!file_path.empty()) {
        config_apply_text(cfg, read_text_file(file_path), file_path);
    }
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override '" + kv + "': expected key=value");
        }
        config_set(cfg, std::string(trim(std::string_view(kv).substr(0, eq))),
                   std::string_view(kv).substr(eq + 1));
    }
    config_validate(cfg);
    return cfg;
}

// Derived component configs -------------------------------------------------

inline ModelConfig model_config_from(const RunConfig& cfg, std::size_t num_items) {
    ModelConfig m;
    m.embed_dim = cfg.model_d;
    m.token_dim = cfg.token_dim();
    m.query_tokens = cfg.model_k_u;
    m.item_tokens = cfg.model_k_c;
    m.num_books = cfg.model_m;
    m.num_words = cfg.model_n;
    m.gamma = cfg.model_gamma;
    m.max_history = cfg.tokenizer_max_history;
    m.kind = interaction_kind_from_name(cfg.scorer_kind);
    m.scorer_hidden = cfg.scorer_hidden;
    m.tokenizer_hidden = cfg.tokenizer_hidden;
    m.per_token_bias = cfg.scorer_per_token_bias;
    m.tied_embeddings = cfg.model_tied_embeddings;
    m.identity_init = cfg.tokenizer_identity_init;
    m.head_jitter = cfg.tokenizer_head_jitter;
    m.num_items = num_items;
    return m;
}

inline TwoTowerConfig two_tower_config_from(const RunConfig& cfg, std::size_t num_items) {
    TwoTowerConfig m;
    m.embed_dim = cfg.model_d;
    m.out_dim = cfg.token_dim();
    m.max_history = cfg.tokenizer_max_history;
    m.tokenizer_hidden = cfg.tokenizer_hidden;
    m.tied_embeddings = cfg.model_tied_embeddings;
    m.identity_init = cfg.tokenizer_identity_init;
    m.num_items = num_items;
    return m;
}

inline TrainConfig train_config_from(const RunConfig& cfg) {
    TrainConfig t;
    t.lr = cfg.train_lr;
    t.epochs = cfg.train_epochs;
    t.batch_size = cfg.train_batch_size;
    t.seed = cfg.train_seed;
    t.l2_embedding = cfg.train_l2_embedding;
    t.dropout = cfg.train_dropout;
    t.loss.lambda = cfg.model_lambda;
    t.loss.negatives_per_positive = cfg.train_negatives;
    t.targets_per_user = cfg.train_targets_per_user;
    t.val_users = cfg.train_val_users;
    return t;
}

inline SyntheticConfig synthetic_config_from(const RunConfig& cfg) {
    SyntheticConfig s;
    s.num_users = cfg.data_num_users;
    s.num_items = cfg.data_num_items;
    s.latent_dim = cfg.data_latent_dim;
    s.interactions_per_user = cfg.data_interactions_per_user;
    s.alpha = cfg.data_alpha;
    s.tau = cfg.data_tau;
    s.seed = cfg.data_seed;
    return s;
}

}  // namespace sparcode
