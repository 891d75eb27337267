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

#include <cmath>
#include <cstring>

#include "sparcode/adam.hpp"
#include "sparcode/gradcheck.hpp"
#include "sparcode/mlp.hpp"
#include "sparcode/params.hpp"

using namespace sparcode;

namespace {

Mlp<double> single_layer(const Matrix<double>& w, const std::vector<double>& b, Activation act) {
    Mlp<double> mlp;
    DenseLayer<double> layer;
    layer.weight = w;
    layer.bias = b;
    layer.act = act;
    mlp.layers.push_back(layer);
    return mlp;
}

Matrix<double> identity2(std::size_t n) {
    Matrix<double> m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

}  // namespace

TEST_CASE("mlp_apply identity layer") {
    auto mlp = single_layer(identity2(2), {0.0, 0.0}, Activation::identity);
    std::vector<double> x{1.0, 2.0};
    auto y = mlp_apply(std::span<const double>(x), mlp);
    CHECK(y == std::vector<double>{1.0, 2.0});
}

TEST_CASE("mlp_apply affine scalar output") {
    Matrix<double> w(1, 2);
    w.at(0, 0) = 2.0;
    w.at(0, 1) = 3.0;
    auto mlp = single_layer(w, {1.0}, Activation::identity);
    std::vector<double> x{1.0, -1.0};
    auto y = mlp_apply(std::span<const double>(x), mlp);
    CHECK(y.size() == 1);
    CHECK(y[0] == doctest::Approx(0.0));
}

TEST_CASE("mlp_apply elementwise relu") {
    auto mlp = single_layer(identity2(3), {0.0, 0.0, 0.0}, Activation::relu);
    std::vector<double> x{-1.0, 0.0, 2.0};
    auto y = mlp_apply(std::span<const double>(x), mlp);
    CHECK(y == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("mlp_apply dimension mismatch throws shape error") {
    auto mlp = single_layer(identity2(2), {0.0, 0.0}, Activation::identity);
    std::vector<double> x{1.0, 2.0, 3.0};
    CHECK_THROWS_AS((void)mlp_apply(std::span<const double>(x), mlp), ShapeError);
}

TEST_CASE("mlp_apply is deterministic bit-for-bit") {
    Rng rng(7);
    auto mlp = make_mlp<double>(5, {8, 8}, 3, Activation::identity, rng);
    std::vector<double> x{0.1, -0.3, 0.7, 1.1, -2.2};
    auto y1 = mlp_apply(std::span<const double>(x), mlp);
    auto y2 = mlp_apply(std::span<const double>(x), mlp);
    CHECK(std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(double)) == 0);
}

TEST_CASE("mlp_gradient scalar product rule") {
    Matrix<double> w(1, 1);
    w.at(0, 0) = 3.0;
    auto mlp = single_layer(w, {0.0}, Activation::identity);
    MlpTrace<double> trace;
    std::vector<double> x{2.0};
    (void)mlp_apply_trace(std::span<const double>(x), mlp, trace);
    auto grads = zeros_like(mlp);
    std::vector<double> up{1.0};
    std::vector<double> gx;
    mlp_backward(mlp, trace, std::span<const double>(up), grads, &gx);
    CHECK(grads.layers[0].weight.at(0, 0) == doctest::Approx(2.0));
    CHECK(gx[0] == doctest::Approx(3.0));
}

TEST_CASE("mlp_gradient dead relu kills upstream") {
    auto mlp = single_layer(identity2(1), {0.0}, Activation::relu);
    MlpTrace<double> trace;
    std::vector<double> x{-1.0};
    (void)mlp_apply_trace(std::span<const double>(x), mlp, trace);
    auto grads = zeros_like(mlp);
    std::vector<double> up{1.0};
    std::vector<double> gx;
    mlp_backward(mlp, trace, std::span<const double>(up), grads, &gx);
    CHECK(grads.layers[0].weight.at(0, 0) == 0.0);
    CHECK(grads.layers[0].bias[0] == 0.0);
    CHECK(gx[0] == 0.0);
}

TEST_CASE("mlp_gradient matches finite differences on a random network") {
    Rng rng(42);
    auto mlp = make_mlp<double>(4, {6}, 2, Activation::identity, rng);
    std::vector<double> x{0.3, -0.8, 1.2, 0.05};
    std::vector<double> up{0.7, -1.3};

    MlpTrace<double> trace;
    (void)mlp_apply_trace(std::span<const double>(x), mlp, trace);
    auto grads = zeros_like(mlp);
    mlp_backward(mlp, trace, std::span<const double>(up), grads);

    std::vector<ParamRef<double>> refs;
    detail::collect_mlp_params<double>(mlp, "mlp", refs);
    std::vector<ParamRef<double>> gref;
    detail::collect_mlp_params<double>(grads, "mlp", gref);
    std::vector<double> x0;
    for (const auto& p : refs) x0.insert(x0.end(), p.data, p.data + p.size);
    auto f = [&](std::span<const double> theta) {
        std::size_t off = 0;
        for (auto& p : refs) {
            for (std::size_t i = 0; i < p.size; ++i) p.data[i] = theta[off + i];
            off += p.size;
        }
        auto y = mlp_apply(std::span<const double>(x), mlp);
        return y[0] * up[0] + y[1] * up[1];
    };
    const auto fd = finite_difference_gradient(f, x0, 1e-5);
    std::size_t off = 0;
    for (const auto& g : gref) {
        for (std::size_t i = 0; i < g.size; ++i) {
            CHECK(relative_error(g.data[i], fd[off + i]) < 1e-4);
        }
        off += g.size;
    }
}

TEST_CASE("adam zero gradient leaves fresh parameters unchanged") {
    std::vector<double> p{1.0, -2.0, 3.0};
    std::vector<double> g{0.0, 0.0, 0.0};
    std::vector<ParamRef<double>> params{{"p", p.data(), p.size()}};
    std::vector<ParamRef<const double>> grads{{"p", g.data(), g.size()}};
    auto state = make_adam_state<double>(params, 0.001);
    adam_step(params, grads, state);
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
    CHECK(state.step == 1);
}

TEST_CASE("adam first step with unit gradient moves by about -lr") {
    std::vector<double> p{0.0};
    std::vector<double> g{1.0};
    std::vector<ParamRef<double>> params{{"p", p.data(), p.size()}};
    std::vector<ParamRef<const double>> grads{{"p", g.data(), g.size()}};
    auto state = make_adam_state<double>(params, 0.001);
    adam_step(params, grads, state);
    CHECK(std::fabs(p[0] - (-0.001)) < 1e-6);
}

TEST_CASE("adam update is odd in the gradient") {
    std::vector<double> pa{0.5}, pb{0.5};
    std::vector<double> ga{1.0}, gb{-1.0};
    std::vector<ParamRef<double>> parama{{"p", pa.data(), 1}};
    std::vector<ParamRef<double>> paramb{{"p", pb.data(), 1}};
    std::vector<ParamRef<const double>> grada{{"p", ga.data(), 1}};
    std::vector<ParamRef<const double>> gradb{{"p", gb.data(), 1}};
    auto sa = make_adam_state<double>(parama, 0.001);
    auto sb = make_adam_state<double>(paramb, 0.001);
    adam_step(parama, grada, sa);
    adam_step(paramb, gradb, sb);
    CHECK(pa[0] - 0.5 == doctest::Approx(-(pb[0] - 0.5)));
}

TEST_CASE("adam with lr=0 never moves parameters") {
    Rng rng(5);
    std::vector<double> p{0.4, -1.7, 2.2};
    const auto before = p;
    std::vector<double> g(3);
    std::vector<ParamRef<double>> params{{"p", p.data(), p.size()}};
    auto state = make_adam_state<double>(params, 0.0);
    for (int it = 0; it < 10; ++it) {
        for (auto& v : g) v = rng.normal();
        std::vector<ParamRef<const double>> grads{{"p", g.data(), g.size()}};
        adam_step(params, grads, state);
    }
    CHECK(p == before);
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
    std::vector<double> p{1.0};
    std::vector<double> g{std::numeric_limits<double>::quiet_NaN()};
    std::vector<ParamRef<double>> params{{"tokenizer.trunk.weight", p.data(), 1}};
    std::vector<ParamRef<const double>> grads{{"tokenizer.trunk.weight", g.data(), 1}};
    auto state = make_adam_state<double>(params, 0.001);
    try {
        adam_step(params, grads, state);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("tokenizer.trunk.weight") != std::string::npos);
    }
}

TEST_CASE("finite_difference_gradient on x^2") {
    auto f = [](std::span<const double> x) { return x[0] * x[0]; };
    const auto g = finite_difference_gradient(f, {3.0}, 1e-3);
    CHECK(std::fabs(g[0] - 6.0) < 1e-5);
}

TEST_CASE("finite_difference_gradient of a constant is zero") {
    auto f = [](std::span<const double>) { return 4.2; };
    const auto g = finite_difference_gradient(f, {1.0, 2.0, 3.0}, 1e-4);
    for (const double v : g) CHECK(v == 0.0);
}

TEST_CASE("finite_difference_gradient on bilinear x*y") {
    auto f = [](std::span<const double> x) { return x[0] * x[1]; };
    const auto g = finite_difference_gradient(f, {2.0, 5.0}, 1e-4);
    CHECK(std::fabs(g[0] - 5.0) < 1e-6);
    CHECK(std::fabs(g[1] - 2.0) < 1e-6);
}

TEST_CASE("finite_difference_gradient requires positive h") {
    auto f = [](std::span<const double> x) { return x[0]; };
    CHECK_THROWS_AS((void)finite_difference_gradient(f, {1.0}, 0.0), ConfigError);
}

TEST_CASE("dropout mask is replayed in backward") {
    Rng rng(11);
    auto mlp = make_mlp<double>(3, {16}, 2, Activation::identity, rng);
    MlpTrace<double> trace;
    std::vector<double> x{0.5, -0.4, 1.0};
    Rng drop(3);
    (void)mlp_apply_trace(std::span<const double>(x), mlp, trace, 0.5, &drop);
    REQUIRE(!trace.mask[0].empty());
    bool any_dropped = false;
    for (const double m : trace.mask[0]) {
        if (m == 0.0) any_dropped = true;
    }
    CHECK(any_dropped);
    // Gradients through dropped units must vanish.
    auto grads = zeros_like(mlp);
    std::vector<double> up{1.0, 1.0};
    mlp_backward(mlp, trace, std::span<const double>(up), grads);
    for (std::size_t o = 0; o < trace.mask[0].size(); ++o) {
        if (trace.mask[0][o] == 0.0) {
            CHECK(grads.layers[0].bias[o] == 0.0);
        }
    }
}
