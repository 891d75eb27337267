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

// Sparse inverted index over (code, item) scores. For every enumerated code
// the scorer is evaluated against every corpus item under the serve bias;
// only strictly positive sparse scores are cached. Posting lists are sorted
// by descending score with ascending item id as the tie-break, so the build
// is independent of code/item iteration order and the serialized file is
// byte-stable.

#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sparcode/error.hpp"
#include "sparcode/io.hpp"
#include "sparcode/model.hpp"
#include "sparcode/quantizer.hpp"
#include "sparcode/scorer.hpp"

namespace sparcode {

template <typename T>
struct PostingEntry {
    std::uint32_t item = 0;
    T score = T(0);

    bool operator==(const PostingEntry&) const = default;
};

template <typename T>
struct PostingList {
    std::vector<PostingEntry<T>> entries;  // score desc, ties by item asc
};

template <typename T>
struct SparseInvertedIndex {
    std::size_t num_books = 0;  // M
    std::size_t num_words = 0;  // N
    T serve_bias = T(0);
    std::size_t num_codes_enumerated = 0;
    std::size_t corpus_size = 0;
    std::vector<std::pair<Code, PostingList<T>>> postings;  // sorted by code, empties omitted

    const PostingList<T>* find(const Code& code) const {
        auto it = std::lower_bound(postings.begin(), postings.end(), code,
                                   [](const auto& entry, const Code& c) {
                                       return code_less(entry.first, c);
                                   });
        if (it == postings.end() || it->first != code) return nullptr;
        return &it->second;
    }

    std::size_t cached_entries() const {
        std::size_t total = 0;
        for (const auto& [code, list] : postings) total += list.entries.size();
        return total;
    }
};

struct SparsityReport {
    double sparsity = 0.0;       // 1 - cached / (num_codes * |I|)
    double average_items = 0.0;  // cached / num_codes
};

enum class CodePolicy { full_grid, observed };

inline CodePolicy code_policy_from_name(const std::string& s) {
    if (s == "full_grid") return CodePolicy::full_grid;
    if (s == "observed") return CodePolicy::observed;
    throw ConfigError("unknown code policy: " + s);
}

inline std::string code_policy_name(CodePolicy p) {
    return p == CodePolicy::full_grid ? "full_grid" : "observed";
}

// All N^M codes in lexicographic order. Throws when N^M would exceed `cap`,
// suggesting the observed policy.
inline std::vector<Code> enumerate_full_grid(std::size_t num_books, std::size_t num_words,
                                             std::size_t cap) {
    double total_d = 1.0;
    for (std::size_t b = 0; b < num_books; ++b) total_d *= static_cast<double>(num_words);
    if (total_d > static_cast<double>(cap)) {
        throw ConfigError("enumerate_codes: full grid N^M = " + fmt_number(total_d) +
                          " exceeds cap " + std::to_string(cap) +
                          "; use the observed code policy instead");
    }
    const auto total = static_cast<std::size_t>(total_d);
    std::vector<Code> codes;
    codes.reserve(total);
    Code cur(num_books, 0);
    for (std::size_t i = 0; i < total; ++i) {
        codes.push_back(cur);
        for (std::size_t b = num_books; b-- > 0;) {
            if (++cur[b] < num_words) break;
            cur[b] = 0;
        }
    }
    return codes;
}

// Distinct codes produced by quantizing the given queries, sorted.
template <typename T>
inline std::vector<Code> observed_codes(const SparCodeModel<T>& model,
                                        const std::vector<std::vector<std::uint32_t>>& queries) {
    std::vector<Code> codes;
    for (const auto& history : queries) {
        const Matrix<T> tokens = model.query_token_matrix(std::span<const std::uint32_t>(history));
        for (std::size_t i = 0; i < tokens.rows; ++i) {
            codes.push_back(quantize(std::span<const T>(tokens.row(i)), model.codebooks).code);
        }
    }
    std::sort(codes.begin(), codes.end(), code_less);
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    return codes;
}

// Item token matrices for the whole corpus, indexed by item id.
template <typename T>
inline std::vector<Matrix<T>> corpus_item_tokens(const SparCodeModel<T>& model,
                                                 std::span<const std::uint32_t> items) {
    std::vector<Matrix<T>> out(model.cfg.num_items);
    for (const std::uint32_t item : items) out[item] = model.item_token_matrix(item);
    return out;
}

template <typename T>
inline PostingList<T> build_posting_list(const SparCodeModel<T>& model,
                                         const std::vector<T>& code_emb,
                                         const std::vector<Matrix<T>>& item_tokens,
                                         std::span<const std::uint32_t> items, T serve_bias,
                                         std::size_t top_l) {
    PostingList<T> list;
    for (const std::uint32_t item : items) {
        const T s = interaction_score(std::span<const T>(code_emb), item_tokens[item], model.scorer);
        const T y = sparse_score(s, serve_bias);
        if (y > T(0)) list.entries.push_back({item, y});
    }
    std::sort(list.entries.begin(), list.entries.end(),
              [](const PostingEntry<T>& a, const PostingEntry<T>& b) {
                  return a.score > b.score || (a.score == b.score && a.item < b.item);
              });
    if (top_l > 0 && list.entries.size() > top_l) list.entries.resize(top_l);
    return list;
}

// Precompute thresholded (code, item) scores. Parallel over codes; each
// (code, item) score is computed in isolation, so worker count never changes
// the result.
template <typename T>
inline SparseInvertedIndex<T> build_index(const SparCodeModel<T>& model,
                                          std::span<const std::uint32_t> items, T serve_bias,
                                          const std::vector<Code>& codes, std::size_t workers = 1,
                                          std::size_t top_l = 0) {
    SparseInvertedIndex<T> index;
    index.num_books = model.cfg.num_books;
    index.num_words = model.cfg.num_words;
    index.serve_bias = serve_bias;
    index.num_codes_enumerated = codes.size();
    index.corpus_size = items.size();

    const auto item_tokens = corpus_item_tokens(model, items);
    std::vector<PostingList<T>> lists(codes.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            const auto emb = code_embedding(model.codebooks, codes[c]);
            lists[c] = build_posting_list(model, emb, item_tokens, items, serve_bias, top_l);
        }
    };
    if (workers <= 1 || codes.size() < 2) {
        work(0, codes.size());
    } else {
        const std::size_t n_workers = std::min(workers, codes.size());
        std::vector<std::thread> pool;
        const std::size_t chunk = (codes.size() + n_workers - 1) / n_workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(codes.size(), begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    std::vector<std::size_t> order(codes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return code_less(codes[a], codes[b]); });
    for (const std::size_t c : order) {
        if (!lists[c].entries.empty()) {
            index.postings.emplace_back(codes[c], std::move(lists[c]));
        }
    }
    return index;
}

template <typename T>
inline SparsityReport sparsity_metrics(const SparseInvertedIndex<T>& index) {
    if (index.num_codes_enumerated == 0) throw ConfigError("sparsity_metrics: no codes enumerated");
    if (index.corpus_size == 0) throw ConfigError("sparsity_metrics: empty corpus");
    const auto cached = static_cast<double>(index.cached_entries());
    const auto codes = static_cast<double>(index.num_codes_enumerated);
    const auto corpus = static_cast<double>(index.corpus_size);
    SparsityReport report;
    report.sparsity = 1.0 - cached / (codes * corpus);
    report.average_items = cached / codes;
    return report;
}

// SPARCODE-INDEX v1 M N b~ num_codes corpus_size, then one line per cached
// entry: comma-joined code, item, score (tab separated), sorted by code then
// score desc. Round-trips bit-exactly.
template <typename T>
inline std::string save_index(const SparseInvertedIndex<T>& index) {
    std::ostringstream os;
    os << "SPARCODE-INDEX v1 " << index.num_books << ' ' << index.num_words << ' '
       << fmt_number(index.serve_bias) << ' ' << index.num_codes_enumerated << ' '
       << index.corpus_size << '\n';
    for (const auto& [code, list] : index.postings) {
        std::string code_str;
        for (std::size_t b = 0; b < code.size(); ++b) {
            if (b) code_str += ',';
            code_str += std::to_string(code[b]);
        }
        for (const auto& entry : list.entries) {
            os << code_str << '\t' << entry.item << '\t' << fmt_number(entry.score) << '\n';
        }
    }
    return os.str();
}

template <typename T>
inline SparseInvertedIndex<T> load_index(const std::string& text, const std::string& context) {
    SparseInvertedIndex<T> index;
    std::size_t lineno = 0;
    bool header_seen = false;
    for (auto raw : split(text, '\n')) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty()) continue;
        const std::string where = context + " line " + std::to_string(lineno);
        if (!header_seen) {
            auto toks = split(line, ' ');
            if (toks.size() != 7 || toks[0] != "SPARCODE-INDEX" || toks[1] != "v1") {
                throw DataError(where + ": bad index header");
            }
            index.num_books = parse_number<std::size_t>(toks[2], where);
            index.num_words = parse_number<std::size_t>(toks[3], where);
            index.serve_bias = parse_number<T>(toks[4], where);
            index.num_codes_enumerated = parse_number<std::size_t>(toks[5], where);
            index.corpus_size = parse_number<std::size_t>(toks[6], where);
            header_seen = true;
            continue;
        }
        auto fields = split(line, '\t');
        if (fields.size() != 3) throw DataError(where + ": expected code<TAB>item<TAB>score");
        Code code;
        for (auto tok : split(fields[0], ',')) {
            code.push_back(parse_number<std::uint32_t>(tok, where));
        }
        if (code.size() != index.num_books) throw DataError(where + ": code arity mismatch");
        PostingEntry<T> entry;
        entry.item = parse_number<std::uint32_t>(fields[1], where);
        entry.score = parse_number<T>(fields[2], where);
        if (!(entry.score > T(0))) throw DataError(where + ": non-positive cached score");
        if (index.postings.empty() || index.postings.back().first != code) {
            if (!index.postings.empty() && !code_less(index.postings.back().first, code)) {
                throw DataError(where + ": codes out of order");
            }
            index.postings.emplace_back(code, PostingList<T>{});
        }
        index.postings.back().second.entries.push_back(entry);
    }
    if (!header_seen) throw DataError(context + ": empty index file");
    return index;
}

}  // namespace sparcode
