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

// Command line surface: gen-data, train, build-index, query, evaluate,
// sweep, bench, selftest. Exit codes: 0 success, 2 config error, 3 data
// error, 4 numeric error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sparcode/checkpoint.hpp"
#include "sparcode/config.hpp"
#include "sparcode/dataset.hpp"
#include "sparcode/evaluator.hpp"
#include "sparcode/indexer.hpp"
#include "sparcode/retriever.hpp"
#include "sparcode/selfcheck.hpp"
#include "sparcode/trainer.hpp"

namespace fs = std::filesystem;
using namespace sparcode;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string run_dir = "run/default";
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Config file (flat key = value lines)");
    cmd->add_option("--set", opts.sets, "Override single keys, e.g. --set model.N=64");
    cmd->add_option("--run-dir", opts.run_dir, "Run directory for inputs/outputs");
    cmd->add_option("--seed", opts.seed, "Override train.seed and data.seed together");
    cmd->add_option("--workers", opts.workers, "Worker threads for index build and sweep");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg = parse_config(opts.config_path, opts.sets);
    if (opts.seed) {
        cfg.train_seed = *opts.seed;
        cfg.data_seed = *opts.seed;
    }
    return cfg;
}

// Every subcommand echoes the fully-resolved config into the run directory.
void prepare_run_dir(const CommonOpts& opts, const RunConfig& cfg) {
    fs::create_directories(opts.run_dir);
    write_text_file(opts.run_dir + "/config.resolved", config_serialize(cfg));
}

std::string data_path(const CommonOpts& opts, const RunConfig& cfg) {
    return cfg.data_path.empty() ? opts.run_dir + "/interactions.csv" : cfg.data_path;
}

Splits load_and_split(const CommonOpts& opts, const RunConfig& cfg, Dataset* out_data = nullptr) {
    Dataset data = load_interactions(data_path(opts, cfg));
    auto splits = split_dataset(data, {cfg.data_ratios[0], cfg.data_ratios[1], cfg.data_ratios[2]},
                                split_mode_from_name(cfg.data_split), cfg.data_seed);
    if (out_data) *out_data = std::move(data);
    return splits;
}

SparCodeModel<float> load_model(const CommonOpts& opts, const std::string& override_path) {
    const std::string path =
        override_path.empty() ? opts.run_dir + "/checkpoint.txt" : override_path;
    return load_checkpoint<float>(read_text_file(path), path);
}

SparseInvertedIndex<float> load_index_file(const CommonOpts& opts,
                                           const std::string& override_path) {
    const std::string path = override_path.empty() ? opts.run_dir + "/index.txt" : override_path;
    return load_index<float>(read_text_file(path), path);
}

std::vector<Code> codes_for_policy(const RunConfig& cfg, const SparCodeModel<float>& model,
                                   const Splits& splits) {
    if (code_policy_from_name(cfg.index_policy) == CodePolicy::full_grid) {
        return enumerate_full_grid(model.cfg.num_books, model.cfg.num_words, cfg.index_cap);
    }
    std::vector<std::vector<std::uint32_t>> queries;
    for (const auto& [user, seq] : splits.train_users) {
        if (!seq.empty()) queries.push_back(seq);
    }
    return observed_codes(model, queries);
}

std::vector<EvalQuery> test_queries(const Splits& splits) {
    std::vector<EvalQuery> out;
    out.reserve(splits.test.size());
    for (const auto& q : splits.test) {
        out.push_back({q.history, {q.target}});
    }
    return out;
}

int cmd_gen_data(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    prepare_run_dir(opts, cfg);
    const auto generated = generate_synthetic(synthetic_config_from(cfg));
    const std::string path = data_path(opts, cfg);
    fs::create_directories(fs::path(path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(path).parent_path());
    write_text_file(path, interactions_to_csv(generated.data));
    if (cfg.data_write_truth) {
        write_text_file(opts.run_dir + "/synthetic_truth.csv", truth_to_csv(generated.truth));
    }
    std::cout << "wrote " << generated.data.records.size() << " interactions for "
              << generated.data.num_users << " users over " << generated.data.num_items
              << " items to " << path << "\n";
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& arch) {
    const RunConfig cfg = resolve_config(opts);
    prepare_run_dir(opts, cfg);
    Dataset data;
    const Splits splits = load_and_split(opts, cfg, &data);
    const TrainConfig tcfg = train_config_from(cfg);
    if (arch == "sparcode") {
        const auto result = train_sparcode(splits, model_config_from(cfg, data.num_items), tcfg);
        write_text_file(opts.run_dir + "/checkpoint.txt", save_checkpoint(result.model));
        write_text_file(opts.run_dir + "/train_log.csv", train_log_to_csv(result.log));
        for (const auto& e : result.log) {
            std::cout << "epoch " << e.epoch << " match " << fmt_number(e.match) << " commit "
                      << fmt_number(e.commit) << " val_recall" << tcfg.val_k << ' '
                      << fmt_number(e.val_recall) << "\n";
        }
        std::cout << "best epoch " << result.best_epoch << "; checkpoint written to "
                  << opts.run_dir << "/checkpoint.txt\n";
    } else if (arch == "twotower") {
        const auto result = train_two_tower(splits, two_tower_config_from(cfg, data.num_items), tcfg);
        write_text_file(opts.run_dir + "/twotower.txt", save_two_tower(result.model));
        write_text_file(opts.run_dir + "/train_log_twotower.csv", train_log_to_csv(result.log));
        for (const auto& e : result.log) {
            std::cout << "epoch " << e.epoch << " match " << fmt_number(e.match) << " val_recall"
                      << tcfg.val_k << ' ' << fmt_number(e.val_recall) << "\n";
        }
        std::cout << "best epoch " << result.best_epoch << "; checkpoint written to "
                  << opts.run_dir << "/twotower.txt\n";
    } else {
        throw ConfigError("train: unknown --arch '" + arch + "' (sparcode or twotower)");
    }
    return 0;
}

int cmd_build_index(const CommonOpts& opts, const std::string& checkpoint_path) {
    const RunConfig cfg = resolve_config(opts);
    prepare_run_dir(opts, cfg);
    const auto model = load_model(opts, checkpoint_path);
    Splits splits;
    if (code_policy_from_name(cfg.index_policy) == CodePolicy::observed) {
        splits = load_and_split(opts, cfg);
    }
    const auto codes = codes_for_policy(cfg, model, splits);
    const float serve_bias = cfg.serve_bias_override()
                                 ? static_cast<float>(*cfg.serve_bias_override())
                                 : model.train_bias(0);
    std::vector<std::uint32_t> items(model.cfg.num_items);
    for (std::uint32_t i = 0; i < items.size(); ++i) items[i] = i;
    const auto index = build_index<float>(model, std::span<const std::uint32_t>(items), serve_bias,
                                          codes, opts.workers, cfg.index_top_l);
    write_text_file(opts.run_dir + "/index.txt", save_index(index));
    const auto report = sparsity_metrics(index);
    std::cout << "index: " << codes.size() << " codes enumerated, " << index.cached_entries()
              << " cached entries, sparsity " << fmt_number(report.sparsity) << ", average items "
              << fmt_number(report.average_items) << ", serve bias " << fmt_number(serve_bias)
              << "\n";
    return 0;
}

std::vector<std::uint32_t> parse_query_line(std::string_view line, std::size_t lineno) {
    std::vector<std::uint32_t> ids;
    for (auto tok : split(line, ',')) {
        const auto t = trim(tok);
        if (t.empty()) continue;
        ids.push_back(parse_number<std::uint32_t>(t, "query line " + std::to_string(lineno)));
    }
    if (ids.empty()) throw DataError("query line " + std::to_string(lineno) + ": no item ids");
    return ids;
}

int cmd_query(const CommonOpts& opts, const std::string& checkpoint_path,
              const std::string& index_path, const std::string& input_path, std::size_t k_flag) {
    const RunConfig cfg = resolve_config(opts);
    const auto model = load_model(opts, checkpoint_path);
    const auto index = load_index_file(opts, index_path);
    const std::size_t k = k_flag > 0 ? k_flag : cfg.eval_k;

    std::string text;
    if (input_path.empty() || input_path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        text = ss.str();
    } else {
        text = read_text_file(input_path);
    }
    std::size_t lineno = 0, qindex = 0;
    for (auto raw : split(text, '\n')) {
        ++lineno;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto history = parse_query_line(line, lineno);
        const auto codes = query_to_codes(model, std::span<const std::uint32_t>(history));
        const auto ranked = retrieve_topk(codes, index, k);
        std::cout << "# query " << qindex++ << "\n";
        for (const auto& r : ranked.entries) {
            std::cout << r.item << '\t' << fmt_number(r.score) << "\n";
        }
    }
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& checkpoint_path,
                 const std::string& index_path) {
    const RunConfig cfg = resolve_config(opts);
    prepare_run_dir(opts, cfg);
    const auto model = load_model(opts, checkpoint_path);
    const auto index = load_index_file(opts, index_path);
    const Splits splits = load_and_split(opts, cfg);
    const auto queries = test_queries(splits);
    const auto report = evaluate_index<float>(model, index, std::span<const EvalQuery>(queries),
                                              std::span<const std::size_t>(cfg.eval_ks));
    write_text_file(opts.run_dir + "/metrics.csv", metrics_to_csv(report));
    std::cout << metrics_to_csv(report);
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& checkpoint_path) {
    const RunConfig cfg = resolve_config(opts);
    prepare_run_dir(opts, cfg);
    const auto model = load_model(opts, checkpoint_path);
    const Splits splits = load_and_split(opts, cfg);
    const auto queries = test_queries(splits);
    const auto codes = codes_for_policy(cfg, model, splits);
    std::vector<std::uint32_t> items(model.cfg.num_items);
    for (std::uint32_t i = 0; i < items.size(); ++i) items[i] = i;

    std::vector<double> grid = cfg.eval_bias_grid;
    if (grid.empty()) {
        std::vector<double> targets = cfg.eval_sparsity_targets;
        if (targets.empty()) targets = {0.0, 0.25, 0.5, 0.75, 0.9, 0.99};
        const auto scores =
            all_interaction_scores(model, std::span<const std::uint32_t>(items), codes);
        grid = bias_grid_for_sparsity(scores, std::span<const double>(targets));
    }
    const auto rows =
        sparsity_sweep<float>(model, std::span<const std::uint32_t>(items),
                              std::span<const EvalQuery>(queries),
                              std::span<const std::size_t>(cfg.eval_ks),
                              std::span<const double>(grid), codes, opts.workers);
    const auto csv = sweep_to_csv(rows, std::span<const std::size_t>(cfg.eval_ks));
    write_text_file(opts.run_dir + "/sweep.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_bench(const CommonOpts& opts, const std::string& checkpoint_path,
              const std::string& index_path, const std::string& twotower_path,
              std::size_t max_queries) {
    const RunConfig cfg = resolve_config(opts);
    prepare_run_dir(opts, cfg);
    const auto model = load_model(opts, checkpoint_path);
    const auto index = load_index_file(opts, index_path);
    const std::string tt_path =
        twotower_path.empty() ? opts.run_dir + "/twotower.txt" : twotower_path;
    const auto tt = load_two_tower<float>(read_text_file(tt_path), tt_path);
    const auto tt_items = two_tower_item_matrix(tt);
    const Splits splits = load_and_split(opts, cfg);
    auto queries = test_queries(splits);
    if (max_queries > 0 && queries.size() > max_queries) queries.resize(max_queries);
    if (queries.empty()) throw DataError("bench: no test queries");

    const auto report = latency_bench<float>(model, index, tt, tt_items,
                                             std::span<const EvalQuery>(queries), cfg.eval_k,
                                             cfg.eval_repeats);
    write_text_file(opts.run_dir + "/bench.csv", bench_to_csv(report));
    std::cout << "sparcode:  mean " << fmt_number(report.sparcode.mean_us) << " us, median "
              << fmt_number(report.sparcode.median_us) << " us, p95 "
              << fmt_number(report.sparcode.p95_us) << " us over "
              << report.sparcode.samples_us.size() << " samples\n";
    std::cout << "two-tower: mean " << fmt_number(report.twotower.mean_us) << " us, median "
              << fmt_number(report.twotower.median_us) << " us, p95 "
              << fmt_number(report.twotower.p95_us) << " us over "
              << report.twotower.samples_us.size() << " samples\n";
    std::cout << "posting entries scanned " << report.entries_scanned
              << " <= addressed posting length " << report.addressed_posting_length << ": "
              << (report.entries_scanned <= report.addressed_posting_length ? "ok" : "VIOLATED")
              << "\n";
    return report.entries_scanned <= report.addressed_posting_length ? 0 : 4;
}

int cmd_selftest(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    prepare_run_dir(opts, cfg);
    std::ostringstream out;
    bool all_pass = true;

    const auto grad = selfcheck::gradient_suite(3, cfg.train_seed);
    all_pass &= grad.pass;
    out << (grad.pass ? "PASS" : "FAIL") << " gradient-suite: " << grad.checked_values
        << " values over " << grad.draws << " draws, worst rel err " << fmt_number(grad.worst_rel_err)
        << " at " << (grad.worst_param.empty() ? "-" : grad.worst_param) << "\n";

    const auto sg = selfcheck::stop_gradient_check(cfg.train_seed + 1);
    all_pass &= sg.pass;
    out << (sg.pass ? "PASS" : "FAIL")
        << " stop-gradient: codeword perturbation moves the score, Adam leaves codewords bit-identical\n";

    const auto quant = selfcheck::quantizer_suite(500, cfg.train_seed + 2);
    all_pass &= quant.pass;
    out << (quant.pass ? "PASS" : "FAIL") << " quantizer-suite: idempotent, "
        << quant.distinct_codes << " distinct codes within the N^M bound, EMA recurrence exact\n";

    // Oracle equivalence on a freshly trained micro model.
    {
        SyntheticConfig scfg;
        scfg.num_users = 80;
        scfg.num_items = 40;
        scfg.latent_dim = 8;
        scfg.interactions_per_user = 8;
        scfg.seed = cfg.data_seed;
        const auto gen = generate_synthetic(scfg);
        const auto splits =
            split_dataset(gen.data, {0.8, 0.1, 0.1}, SplitMode::leave_last_out, cfg.data_seed);
        ModelConfig mcfg;
        mcfg.embed_dim = 8;
        mcfg.token_dim = 8;
        mcfg.query_tokens = 2;
        mcfg.item_tokens = 2;
        mcfg.num_books = 2;
        mcfg.num_words = 4;
        mcfg.gamma = 0.95;
        mcfg.max_history = 10;
        mcfg.kind = InteractionKind::inner_pdnn;
        mcfg.scorer_hidden = {16};
        mcfg.tokenizer_hidden = {16};
        mcfg.num_items = gen.data.num_items;
        TrainConfig tcfg;
        tcfg.epochs = 2;
        tcfg.batch_size = 32;
        tcfg.seed = cfg.train_seed;
        tcfg.loss.negatives_per_positive = 8;
        tcfg.targets_per_user = 2;
        const auto trained = train_sparcode(splits, mcfg, tcfg);
        std::vector<std::vector<std::uint32_t>> queries;
        for (const auto& q : splits.test) queries.push_back(q.history);
        if (queries.size() > 30) queries.resize(30);
        const std::vector<std::size_t> ks{5, 10};
        const float b = trained.model.train_bias(0);
        const std::vector<float> biases{b, b - 1.0f};
        const auto oracle = selfcheck::oracle_equivalence<float>(
            trained.model, queries, std::span<const std::size_t>(ks),
            std::span<const float>(biases), opts.workers);
        all_pass &= oracle.pass;
        out << (oracle.pass ? "PASS" : "FAIL") << " oracle-equivalence: " << oracle.comparisons
            << " comparisons over " << oracle.queries << " queries, " << oracle.mismatches
            << " mismatches\n";
    }

    out << (all_pass ? "PASS" : "FAIL") << " selftest\n";
    write_text_file(opts.run_dir + "/selftest.txt", out.str());
    std::cout << out.str();
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparcode: sparse-code candidate matching engine"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string arch = "sparcode";
    std::string checkpoint_path, index_path, twotower_path, input_path;
    std::size_t k_flag = 0;
    std::size_t bench_queries = 100;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic interaction dataset");
    add_common(gen, opts);

    auto* train = app.add_subcommand("train", "Train a model and write its checkpoint");
    add_common(train, opts);
    train->add_option("--arch", arch, "Architecture: sparcode (default) or twotower");

    auto* build = app.add_subcommand("build-index", "Precompute the sparse inverted index");
    add_common(build, opts);
    build->add_option("--checkpoint", checkpoint_path, "Checkpoint path (default run dir)");

    auto* query = app.add_subcommand("query", "Retrieve top-k items for query lines");
    add_common(query, opts);
    query->add_option("--checkpoint", checkpoint_path, "Checkpoint path (default run dir)");
    query->add_option("--index", index_path, "Index path (default run dir)");
    query->add_option("--input", input_path, "Query file, one comma-separated id list per line; - for stdin");
    query->add_option("-k,--k", k_flag, "Top-k to return (default eval.k)");

    auto* evaluate = app.add_subcommand("evaluate", "Ranking metrics on the test split");
    add_common(evaluate, opts);
    evaluate->add_option("--checkpoint", checkpoint_path, "Checkpoint path (default run dir)");
    evaluate->add_option("--index", index_path, "Index path (default run dir)");

    auto* sweep = app.add_subcommand("sweep", "Sparsity grid: build one index per serve bias");
    add_common(sweep, opts);
    sweep->add_option("--checkpoint", checkpoint_path, "Checkpoint path (default run dir)");

    auto* bench = app.add_subcommand("bench", "Per-query latency, SparCode vs two-tower");
    add_common(bench, opts);
    bench->add_option("--checkpoint", checkpoint_path, "Checkpoint path (default run dir)");
    bench->add_option("--index", index_path, "Index path (default run dir)");
    bench->add_option("--twotower", twotower_path, "Two-tower checkpoint (default run dir)");
    bench->add_option("--queries", bench_queries, "Max test queries to time (0 = all)");

    auto* selftest = app.add_subcommand("selftest", "Gradient, quantizer, and oracle suites");
    add_common(selftest, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(opts);
        if (train->parsed()) return cmd_train(opts, arch);
        if (build->parsed()) return cmd_build_index(opts, checkpoint_path);
        if (query->parsed()) return cmd_query(opts, checkpoint_path, index_path, input_path, k_flag);
        if (evaluate->parsed()) return cmd_evaluate(opts, checkpoint_path, index_path);
        if (sweep->parsed()) return cmd_sweep(opts, checkpoint_path);
        if (bench->parsed())
            return cmd_bench(opts, checkpoint_path, index_path, twotower_path, bench_queries);
        if (selftest->parsed()) return cmd_selftest(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
