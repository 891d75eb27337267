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

#pragma once

#include <string>
#include <vector>

#include "sparcode/adam.hpp"
#include "sparcode/mlp.hpp"
#include "sparcode/tokenizer.hpp"

namespace sparcode::detail {

template <typename T>
inline void collect_mlp_params(Mlp<T>& mlp, const std::string& prefix,
                               std::vector<ParamRef<T>>& out) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        auto& layer = mlp.layers[l];
        out.push_back({prefix + ".layer" + std::to_string(l) + ".weight",
                       layer.weight.data.data(), layer.weight.data.size()});
        out.push_back({prefix + ".layer" + std::to_string(l) + ".bias", layer.bias.data(),
                       layer.bias.size()});
    }
}

template <typename T>
inline void collect_tokenizer_params(Tokenizer<T>& tok, const std::string& prefix,
                                     std::vector<ParamRef<T>>& out) {
    collect_mlp_params<T>(tok.trunk, prefix + ".trunk", out);
    for (std::size_t i = 0; i < tok.heads.size(); ++i) {
        auto& head = tok.heads[i];
        out.push_back({prefix + ".head" + std::to_string(i) + ".weight", head.weight.data.data(),
                       head.weight.data.size()});
        out.push_back({prefix + ".head" + std::to_string(i) + ".bias", head.bias.data(),
                       head.bias.size()});
    }
}

}  // namespace sparcode::detail
