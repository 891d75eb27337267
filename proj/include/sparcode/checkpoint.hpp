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

// Checkpoint text format (see FORMATS.md in the repository root):
//   SPARCODE-CHECKPOINT v1
//   [config] key/value lines
//   [embedding <name> <rows> <cols>] one whitespace-separated row per line
//   [tokenizer <side> <heads>] trunk mlp block + head blocks
//   [codebook <m> <N> <sub_dim>] codeword rows, counts, accumulators, gamma
//   [scorer <kind>] kind-specific blocks, then [bias <n>]
//   END
// Values are written in shortest round-trip form, so a save/load/save cycle
// is byte-identical.

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "sparcode/io.hpp"
#include "sparcode/model.hpp"
#include "sparcode/two_tower.hpp"

namespace sparcode {

namespace ckpt {

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    if (v.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

inline std::vector<std::size_t> parse_sizes(std::string_view s, const std::string& context) {
    std::vector<std::size_t> out;
    if (s == "-") return out;
    for (auto tok : split(s, ',')) out.push_back(parse_number<std::size_t>(trim(tok), context));
    return out;
}

template <typename T>
inline void write_row(std::ostringstream& os, std::span<const T> row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ' ';
        os << fmt_number(row[i]);
    }
    os << '\n';
}

template <typename T>
inline void write_matrix(std::ostringstream& os, const Matrix<T>& m) {
    for (std::size_t r = 0; r < m.rows; ++r) write_row(os, std::span<const T>(m.row(r)));
}

class Reader {
  public:
    explicit Reader(const std::string& text, std::string context)
        : context_(std::move(context)) {
        for (auto line : split(text, '\n')) lines_.emplace_back(trim(line));
    }

    bool eof() const { return pos_ >= lines_.size(); }

    std::string_view next() {
        while (pos_ < lines_.size() && lines_[pos_].empty()) ++pos_;
        if (pos_ >= lines_.size()) throw DataError(context_ + ": unexpected end of file");
        return lines_[pos_++];
    }

    void expect(std::string_view exact) {
        auto line = next();
        if (line != exact) {
            throw DataError(context_ + " line " + std::to_string(pos_) + ": expected '" +
                            std::string(exact) + "', got '" + std::string(line) + "'");
        }
    }

    std::vector<std::string_view> next_tokens() {
        auto line = next();
        std::vector<std::string_view> toks;
        for (auto t : split(line, ' ')) {
            if (!t.empty()) toks.push_back(t);
        }
        return toks;
    }

    template <typename T>
    std::vector<T> next_row(std::size_t expected) {
        auto toks = next_tokens();
        if (toks.size() != expected) {
            throw DataError(context_ + " line " + std::to_string(pos_) + ": expected " +
                            std::to_string(expected) + " values, got " + std::to_string(toks.size()));
        }
        std::vector<T> out(expected);
        for (std::size_t i = 0; i < expected; ++i) out[i] = parse_number<T>(toks[i], context_);
        return out;
    }

    template <typename T>
    Matrix<T> next_matrix(std::size_t rows, std::size_t cols) {
        Matrix<T> m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = next_row<T>(cols);
            for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = row[c];
        }
        return m;
    }

    const std::string& context() const { return context_; }
    std::size_t line_number() const { return pos_; }

  private:
    std::vector<std::string> lines_;
    std::size_t pos_ = 0;
    std::string context_;
};

inline std::string activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "identity";
}

inline Activation activation_from_name(std::string_view s, const std::string& context) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw DataError(context + ": unknown activation '" + std::string(s) + "'");
}

template <typename T>
inline void write_mlp(std::ostringstream& os, const std::string& name, const Mlp<T>& mlp) {
    os << "[mlp " << name << ' ' << mlp.layers.size() << "]\n";
    for (const auto& layer : mlp.layers) {
        os << "[layer " << layer.in_dim() << ' ' << layer.out_dim() << ' '
           << activation_name(layer.act) << "]\n";
        write_matrix(os, layer.weight);
        write_row(os, std::span<const T>(layer.bias.data(), layer.bias.size()));
    }
}

template <typename T>
inline Mlp<T> read_mlp(Reader& in, const std::string& name) {
    auto toks = in.next_tokens();
    if (toks.size() != 3 || toks[0] != "[mlp" || toks[1] != name) {
        throw DataError(in.context() + ": expected [mlp " + name + " ...] block");
    }
    const auto count = parse_number<std::size_t>(split(toks[2], ']')[0], in.context());
    Mlp<T> mlp;
    for (std::size_t l = 0; l < count; ++l) {
        auto h = in.next_tokens();
        if (h.size() != 4 || h[0] != "[layer") throw DataError(in.context() + ": expected [layer ...]");
        const auto in_dim = parse_number<std::size_t>(h[1], in.context());
        const auto out_dim = parse_number<std::size_t>(h[2], in.context());
        DenseLayer<T> layer;
        layer.act = activation_from_name(split(h[3], ']')[0], in.context());
        layer.weight = in.next_matrix<T>(out_dim, in_dim);
        layer.bias = in.next_row<T>(out_dim);
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

template <typename T>
inline void write_tokenizer(std::ostringstream& os, const std::string& side,
                            const Tokenizer<T>& tok) {
    os << "[tokenizer " << side << ' ' << tok.heads.size() << "]\n";
    write_mlp(os, "trunk", tok.trunk);
    for (std::size_t i = 0; i < tok.heads.size(); ++i) {
        const auto& head = tok.heads[i];
        os << "[head " << i << ' ' << head.in_dim() << ' ' << head.out_dim() << "]\n";
        write_matrix(os, head.weight);
        write_row(os, std::span<const T>(head.bias.data(), head.bias.size()));
    }
}

template <typename T>
inline Tokenizer<T> read_tokenizer(Reader& in, const std::string& side) {
    auto toks = in.next_tokens();
    if (toks.size() != 3 || toks[0] != "[tokenizer" || toks[1] != side) {
        throw DataError(in.context() + ": expected [tokenizer " + side + " ...] block");
    }
    const auto heads = parse_number<std::size_t>(split(toks[2], ']')[0], in.context());
    Tokenizer<T> tok;
    tok.trunk = read_mlp<T>(in, "trunk");
    for (std::size_t i = 0; i < heads; ++i) {
        auto h = in.next_tokens();
        if (h.size() != 4 || h[0] != "[head") throw DataError(in.context() + ": expected [head ...]");
        const auto in_dim = parse_number<std::size_t>(h[2], in.context());
        const auto out_dim = parse_number<std::size_t>(split(h[3], ']')[0], in.context());
        DenseLayer<T> head;
        head.act = Activation::identity;
        head.weight = in.next_matrix<T>(out_dim, in_dim);
        head.bias = in.next_row<T>(out_dim);
        tok.heads.push_back(std::move(head));
    }
    return tok;
}

}  // namespace ckpt

template <typename T>
inline std::string save_checkpoint(const SparCodeModel<T>& m) {
    std::ostringstream os;
    os << "SPARCODE-CHECKPOINT v1\n";
    os << "[config]\n";
    os << "embed_dim " << m.cfg.embed_dim << '\n';
    os << "token_dim " << m.cfg.token_dim << '\n';
    os << "query_tokens " << m.cfg.query_tokens << '\n';
    os << "item_tokens " << m.cfg.item_tokens << '\n';
    os << "num_books " << m.cfg.num_books << '\n';
    os << "num_words " << m.cfg.num_words << '\n';
    os << "gamma " << fmt_number(m.cfg.gamma) << '\n';
    os << "max_history " << m.cfg.max_history << '\n';
    os << "scorer_kind " << interaction_kind_name(m.cfg.kind) << '\n';
    os << "scorer_hidden " << ckpt::join_sizes(m.cfg.scorer_hidden) << '\n';
    os << "tokenizer_hidden " << ckpt::join_sizes(m.cfg.tokenizer_hidden) << '\n';
    os << "per_token_bias " << (m.cfg.per_token_bias ? 1 : 0) << '\n';
    os << "tied_embeddings " << (m.cfg.tied_embeddings ? 1 : 0) << '\n';
    os << "identity_init " << (m.cfg.identity_init ? 1 : 0) << '\n';
    os << "head_jitter " << fmt_number(m.cfg.head_jitter) << '\n';
    os << "num_items " << m.cfg.num_items << '\n';
    if (!m.cfg.tied_embeddings) {
        os << "[embedding history " << m.history_table.rows.rows << ' '
           << m.history_table.rows.cols << "]\n";
        ckpt::write_matrix(os, m.history_table.rows);
    }
    os << "[embedding item " << m.item_table.rows.rows << ' ' << m.item_table.rows.cols << "]\n";
    ckpt::write_matrix(os, m.item_table.rows);
    ckpt::write_tokenizer(os, "query", m.query_tokenizer);
    ckpt::write_tokenizer(os, "item", m.item_tokenizer);
    for (std::size_t b = 0; b < m.codebooks.num_books; ++b) {
        os << "[codebook " << b << ' ' << m.codebooks.num_words << ' ' << m.codebooks.sub_dim
           << "]\n";
        ckpt::write_matrix(os, m.codebooks.words[b]);
        ckpt::write_row(os, std::span<const T>(m.codebooks.counts.row(b)));
        ckpt::write_matrix(os, m.codebooks.accum[b]);
        os << fmt_number(m.codebooks.gamma) << '\n';
    }
    os << "[scorer " << interaction_kind_name(m.scorer.kind) << "]\n";
    switch (m.scorer.kind) {
        case InteractionKind::dot_product:
        case InteractionKind::maxsim:
            break;
        case InteractionKind::dnn:
        case InteractionKind::inner_pdnn:
            ckpt::write_mlp(os, "score", m.scorer.mlp);
            break;
        case InteractionKind::crossnet:
            for (std::size_t l = 0; l < m.scorer.cross.size(); ++l) {
                os << "[cross " << l << ' ' << m.scorer.cross[l].weight.size() << "]\n";
                ckpt::write_row(os, std::span<const T>(m.scorer.cross[l].weight.data(),
                                                       m.scorer.cross[l].weight.size()));
                ckpt::write_row(os, std::span<const T>(m.scorer.cross[l].bias.data(),
                                                       m.scorer.cross[l].bias.size()));
            }
            os << "[cross_out " << m.scorer.cross_out_w.size() << "]\n";
            ckpt::write_row(os, std::span<const T>(m.scorer.cross_out_w.data(),
                                                   m.scorer.cross_out_w.size()));
            os << fmt_number(m.scorer.cross_out_b) << '\n';
            break;
    }
    os << "[bias " << m.scorer.bias.size() << "]\n";
    ckpt::write_row(os, std::span<const T>(m.scorer.bias.data(), m.scorer.bias.size()));
    os << "END\n";
    return os.str();
}

template <typename T>
inline SparCodeModel<T> load_checkpoint(const std::string& text, const std::string& context) {
    ckpt::Reader in(text, context);
    in.expect("SPARCODE-CHECKPOINT v1");
    in.expect("[config]");
    ModelConfig cfg;
    for (int i = 0; i < 16; ++i) {
        auto toks = in.next_tokens();
        if (toks.size() != 2) throw DataError(context + ": malformed config line");
        const std::string key(toks[0]);
        const std::string_view val = toks[1];
        if (key == "embed_dim") cfg.embed_dim = parse_number<std::size_t>(val, context);
        else if (key == "token_dim") cfg.token_dim = parse_number<std::size_t>(val, context);
        else if (key == "query_tokens") cfg.query_tokens = parse_number<std::size_t>(val, context);
        else if (key == "item_tokens") cfg.item_tokens = parse_number<std::size_t>(val, context);
        else if (key == "num_books") cfg.num_books = parse_number<std::size_t>(val, context);
        else if (key == "num_words") cfg.num_words = parse_number<std::size_t>(val, context);
        else if (key == "gamma") cfg.gamma = parse_number<double>(val, context);
        else if (key == "max_history") cfg.max_history = parse_number<std::size_t>(val, context);
        else if (key == "scorer_kind") cfg.kind = interaction_kind_from_name(std::string(val));
        else if (key == "scorer_hidden") cfg.scorer_hidden = ckpt::parse_sizes(val, context);
        else if (key == "tokenizer_hidden") cfg.tokenizer_hidden = ckpt::parse_sizes(val, context);
        else if (key == "per_token_bias") cfg.per_token_bias = parse_number<int>(val, context) != 0;
        else if (key == "tied_embeddings") cfg.tied_embeddings = parse_number<int>(val, context) != 0;
        else if (key == "identity_init") cfg.identity_init = parse_number<int>(val, context) != 0;
        else if (key == "head_jitter") cfg.head_jitter = parse_number<double>(val, context);
        else if (key == "num_items") cfg.num_items = parse_number<std::size_t>(val, context);
        else throw DataError(context + ": unknown config key '" + key + "'");
    }
    cfg.validate();

    SparCodeModel<T> m;
    m.cfg = cfg;
    const std::size_t vocab = cfg.num_items + 1;

    auto read_embedding = [&](const std::string& name) {
        auto toks = in.next_tokens();
        if (toks.size() != 4 || toks[0] != "[embedding" || toks[1] != name) {
            throw DataError(context + ": expected [embedding " + name + " ...] block");
        }
        const auto rows = parse_number<std::size_t>(toks[2], context);
        const auto cols = parse_number<std::size_t>(split(toks[3], ']')[0], context);
        if (rows != vocab || cols != cfg.embed_dim) {
            throw DataError(context + ": embedding '" + name + "' has shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) +
                            ", config requires " + std::to_string(vocab) + "x" +
                            std::to_string(cfg.embed_dim));
        }
        EmbeddingTable<T> table;
        table.name = name;
        table.rows = in.next_matrix<T>(rows, cols);
        return table;
    };
    if (!cfg.tied_embeddings) {
        m.history_table = read_embedding("history");
    } else {
        m.history_table.name = "history";
    }
    m.item_table = read_embedding("item");
    m.query_tokenizer = ckpt::read_tokenizer<T>(in, "query");
    m.item_tokenizer = ckpt::read_tokenizer<T>(in, "item");

    m.codebooks.num_books = cfg.num_books;
    m.codebooks.num_words = cfg.num_words;
    m.codebooks.sub_dim = cfg.token_dim / cfg.num_books;
    m.codebooks.counts = Matrix<T>(cfg.num_books, cfg.num_words);
    for (std::size_t b = 0; b < cfg.num_books; ++b) {
        auto toks = in.next_tokens();
        if (toks.size() != 4 || toks[0] != "[codebook") {
            throw DataError(context + ": expected [codebook ...] block");
        }
        const auto n = parse_number<std::size_t>(toks[2], context);
        const auto sub = parse_number<std::size_t>(split(toks[3], ']')[0], context);
        if (n != cfg.num_words || sub != m.codebooks.sub_dim) {
            throw DataError(context + ": codebook block shape mismatch");
        }
        m.codebooks.words.push_back(in.next_matrix<T>(n, sub));
        auto counts = in.next_row<T>(n);
        for (std::size_t k = 0; k < n; ++k) m.codebooks.counts.at(b, k) = counts[k];
        m.codebooks.accum.push_back(in.next_matrix<T>(n, sub));
        m.codebooks.gamma = in.next_row<T>(1)[0];
    }

    auto stoks = in.next_tokens();
    if (stoks.size() != 2 || stoks[0] != "[scorer") {
        throw DataError(context + ": expected [scorer ...] block");
    }
    m.scorer.kind = interaction_kind_from_name(std::string(split(stoks[1], ']')[0]));
    if (m.scorer.kind != cfg.kind) throw DataError(context + ": scorer kind != config kind");
    switch (m.scorer.kind) {
        case InteractionKind::dot_product:
        case InteractionKind::maxsim:
            break;
        case InteractionKind::dnn:
        case InteractionKind::inner_pdnn:
            m.scorer.mlp = ckpt::read_mlp<T>(in, "score");
            break;
        case InteractionKind::crossnet: {
            for (std::size_t l = 0; l < kCrossNetLayers; ++l) {
                auto h = in.next_tokens();
                if (h.size() != 3 || h[0] != "[cross") throw DataError(context + ": expected [cross ...]");
                const auto d = parse_number<std::size_t>(split(h[2], ']')[0], context);
                CrossLayer<T> layer;
                layer.weight = in.next_row<T>(d);
                layer.bias = in.next_row<T>(d);
                m.scorer.cross.push_back(std::move(layer));
            }
            auto h = in.next_tokens();
            if (h.size() != 2 || h[0] != "[cross_out") throw DataError(context + ": expected [cross_out ...]");
            const auto d = parse_number<std::size_t>(split(h[1], ']')[0], context);
            m.scorer.cross_out_w = in.next_row<T>(d);
            m.scorer.cross_out_b = in.next_row<T>(1)[0];
            break;
        }
    }
    auto btoks = in.next_tokens();
    if (btoks.size() != 2 || btoks[0] != "[bias") throw DataError(context + ": expected [bias ...]");
    const auto bn = parse_number<std::size_t>(split(btoks[1], ']')[0], context);
    m.scorer.bias = in.next_row<T>(bn);
    in.expect("END");
    check_interaction_shapes(m.scorer, cfg.token_dim, cfg.item_tokens);
    return m;
}

template <typename T>
inline std::string save_two_tower(const TwoTowerModel<T>& m) {
    std::ostringstream os;
    os << "TWOTOWER-CHECKPOINT v1\n";
    os << "[config]\n";
    os << "embed_dim " << m.cfg.embed_dim << '\n';
    os << "out_dim " << m.cfg.out_dim << '\n';
    os << "max_history " << m.cfg.max_history << '\n';
    os << "tokenizer_hidden " << ckpt::join_sizes(m.cfg.tokenizer_hidden) << '\n';
    os << "tied_embeddings " << (m.cfg.tied_embeddings ? 1 : 0) << '\n';
    os << "identity_init " << (m.cfg.identity_init ? 1 : 0) << '\n';
    os << "num_items " << m.cfg.num_items << '\n';
    if (!m.cfg.tied_embeddings) {
        os << "[embedding history " << m.history_table.rows.rows << ' '
           << m.history_table.rows.cols << "]\n";
        ckpt::write_matrix(os, m.history_table.rows);
    }
    os << "[embedding item " << m.item_table.rows.rows << ' ' << m.item_table.rows.cols << "]\n";
    ckpt::write_matrix(os, m.item_table.rows);
    ckpt::write_mlp(os, "query_trunk", m.query_trunk);
    ckpt::write_mlp(os, "item_trunk", m.item_trunk);
    os << "END\n";
    return os.str();
}

template <typename T>
inline TwoTowerModel<T> load_two_tower(const std::string& text, const std::string& context) {
    ckpt::Reader in(text, context);
    in.expect("TWOTOWER-CHECKPOINT v1");
    in.expect("[config]");
    TwoTowerConfig cfg;
    for (int i = 0; i < 7; ++i) {
        auto toks = in.next_tokens();
        if (toks.size() != 2) throw DataError(context + ": malformed config line");
        const std::string key(toks[0]);
        const std::string_view val = toks[1];
        if (key == "embed_dim") cfg.embed_dim = parse_number<std::size_t>(val, context);
        else if (key == "out_dim") cfg.out_dim = parse_number<std::size_t>(val, context);
        else if (key == "max_history") cfg.max_history = parse_number<std::size_t>(val, context);
        else if (key == "tokenizer_hidden") cfg.tokenizer_hidden = ckpt::parse_sizes(val, context);
        else if (key == "tied_embeddings") cfg.tied_embeddings = parse_number<int>(val, context) != 0;
        else if (key == "identity_init") cfg.identity_init = parse_number<int>(val, context) != 0;
        else if (key == "num_items") cfg.num_items = parse_number<std::size_t>(val, context);
        else throw DataError(context + ": unknown config key '" + key + "'");
    }
    cfg.validate();
    TwoTowerModel<T> m;
    m.cfg = cfg;
    const std::size_t vocab = cfg.num_items + 1;
    auto read_embedding = [&](const std::string& name) {
        auto toks = in.next_tokens();
        if (toks.size() != 4 || toks[0] != "[embedding" || toks[1] != name) {
            throw DataError(context + ": expected [embedding " + name + " ...] block");
        }
        const auto rows = parse_number<std::size_t>(toks[2], context);
        const auto cols = parse_number<std::size_t>(split(toks[3], ']')[0], context);
        if (rows != vocab || cols != cfg.embed_dim) throw DataError(context + ": embedding shape mismatch");
        EmbeddingTable<T> table;
        table.name = name;
        table.rows = in.next_matrix<T>(rows, cols);
        return table;
    };
    if (!cfg.tied_embeddings) {
        m.history_table = read_embedding("history");
    } else {
        m.history_table.name = "history";
    }
    m.item_table = read_embedding("item");
    m.query_trunk = ckpt::read_mlp<T>(in, "query_trunk");
    m.item_trunk = ckpt::read_mlp<T>(in, "item_trunk");
    in.expect("END");
    return m;
}

}  // namespace sparcode
