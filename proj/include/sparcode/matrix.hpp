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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sparcode/error.hpp"

namespace sparcode {

// Dense row-major matrix. Training instantiates T=float, gradient checks
// T=double.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0)) {}

    T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    void fill(T v) { data.assign(data.size(), v); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

template <typename T>
inline T dot(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: length mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
    T acc = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
inline void axpy(T alpha, std::span<const T> x, std::span<T> y) {
    if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

template <typename T>
inline T squared_distance(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw ShapeError("squared_distance: length mismatch");
    T acc = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

// Column-wise mean of the rows.
template <typename T>
inline std::vector<T> mean_rows(const Matrix<T>& m) {
    if (m.rows == 0) throw DataError("mean_rows: empty input");
    std::vector<T> out(m.cols, T(0));
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) out[c] += m.at(r, c);
    }
    const T inv = T(1) / static_cast<T>(m.rows);
    for (auto& v : out) v *= inv;
    return out;
}

}  // namespace sparcode
