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

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "sparcode/error.hpp"

namespace sparcode {

// Central-difference gradient oracle: (f(x + h e_i) - f(x - h e_i)) / 2h.
// The oracle is the independent reference every analytic gradient in this
// project is checked against; it never calls the backprop path.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::vector<double> x, double h) {
    if (!(h > 0.0)) throw ConfigError("finite_difference_gradient: h must be > 0");
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(std::span<const double>(x));
        x[i] = xi - h;
        const double fm = f(std::span<const double>(x));
        x[i] = xi;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// |a - b| / max(|a|, |b|, floor); zero when both are below the floor.
inline double relative_error(double a, double b, double floor = 1e-8) {
    const double denom = std::max({std::fabs(a), std::fabs(b), floor});
    return std::fabs(a - b) / denom;
}

}  // namespace sparcode
