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

#include <stdexcept>
#include <string>

namespace sparcode {

// Error taxonomy mapped to CLI exit codes: ConfigError -> 2, DataError -> 3,
// NumericError -> 4. ShapeError reports a dimension mismatch between
// configured components and is treated as a configuration problem.

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Lookup failures (feature id outside an embedding table, unknown item).
class LookupError : public DataError {
  public:
    using DataError::DataError;
};

class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace sparcode
