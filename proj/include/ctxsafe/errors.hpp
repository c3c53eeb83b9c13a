// Copyright 2026 The ctxsafe Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <stdexcept>
#include <string>

namespace ctxsafe {

// Bad arguments: wrong dimensions, out-of-range probabilities, empty data.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorization or other numerical breakdown.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double last_jitter = 0.0)
      : std::runtime_error(what), last_jitter_(last_jitter) {}

  // Diagonal jitter of the final factorization attempt (0 if not applicable).
  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double last_jitter_;
};

// Invalid experiment configuration file or values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ctxsafe
