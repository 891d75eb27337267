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

#include "sparcode/config.hpp"

using namespace sparcode;

TEST_CASE("empty input yields the documented defaults") {
    const RunConfig cfg = parse_config("", {});
    CHECK(cfg.model_m == 2);
    CHECK(cfg.model_n == 256);
    CHECK(cfg.model_k_u == 2);
    CHECK(cfg.model_lambda == 0.25);
    CHECK(cfg.train_lr == 0.001);
    CHECK(cfg.train_l2_embedding == 1e-6);
    CHECK(cfg.train_dropout == 0.1);
    CHECK(cfg.scorer_kind == "inner_pdnn");
    CHECK(cfg.scorer_hidden == std::vector<std::size_t>{256, 256, 256});
    CHECK(cfg.tokenizer_max_history == 20);
    CHECK(cfg.token_dim() == cfg.model_d);
}

TEST_CASE("CLI overrides win over file values") {
    RunConfig cfg;
    config_apply_text(cfg, "model.N = 64\n", "file");
    CHECK(cfg.model_n == 64);
    config_set(cfg, "model.N", "128");
    CHECK(cfg.model_n == 128);
}

TEST_CASE("unknown keys are rejected by name") {
    RunConfig cfg;
    try {
        config_set(cfg, "foo", "1");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()) == "unknown key: foo");
    }
}

TEST_CASE("constraint violations cite the constraint") {
    RunConfig cfg;
    cfg.model_d_t = 10;
    cfg.model_m = 3;
    try {
        config_validate(cfg);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("D_T % M") != std::string::npos);
    }
}

TEST_CASE("resolved echo round-trips to an equal config") {
    RunConfig cfg;
    config_apply_text(cfg,
                      "# comment\n"
                      "model.N = 32\n"
                      "model.D = 24\n"
                      "model.D_T = 24\n"
                      "scorer.kind = crossnet\n"
                      "scorer.hidden = [64,32]\n"
                      "train.lr = 0.0005\n"
                      "data.ratios = [0.7,0.2,0.1]\n"
                      "eval.ks = [1,5]\n"
                      "index.serve_bias = -0.25\n",
                      "file");
    config_validate(cfg);
    const std::string echo = config_serialize(cfg);
    RunConfig reparsed;
    config_apply_text(reparsed, echo, "echo");
    CHECK(reparsed == cfg);
    CHECK(config_serialize(reparsed) == echo);
}

TEST_CASE("serve bias override parses 'trained' or a number") {
    RunConfig cfg;
    CHECK(!cfg.serve_bias_override().has_value());
    config_set(cfg, "index.serve_bias", "-1.5");
    REQUIRE(cfg.serve_bias_override().has_value());
    CHECK(*cfg.serve_bias_override() == doctest::Approx(-1.5));
    config_set(cfg, "index.serve_bias", "bogus");
    CHECK_THROWS(cfg.serve_bias_override());
}

TEST_CASE("list parsing accepts bracketed and bare forms") {
    RunConfig cfg;
    config_set(cfg, "eval.ks", "[5,10]");
    CHECK(cfg.eval_ks == std::vector<std::size_t>{5, 10});
    config_set(cfg, "eval.ks", "3,7");
    CHECK(cfg.eval_ks == std::vector<std::size_t>{3, 7});
    config_set(cfg, "eval.bias_grid", "[]");
    CHECK(cfg.eval_bias_grid.empty());
}

TEST_CASE("derived model config carries the resolved token width") {
    RunConfig cfg;
    config_set(cfg, "model.D", "32");
    config_set(cfg, "model.D_T", "0");
    const auto m = model_config_from(cfg, 100);
    CHECK(m.embed_dim == 32);
    CHECK(m.token_dim == 32);
    CHECK(m.num_items == 100);
    const auto tt = two_tower_config_from(cfg, 100);
    CHECK(tt.out_dim == 32);
    const auto t = train_config_from(cfg);
    CHECK(t.loss.lambda == cfg.model_lambda);
}
