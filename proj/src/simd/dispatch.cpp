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

#include <cstdlib>
#include <string>

#include "ctxsafe/simd/kernels.hpp"

namespace ctxsafe::simd {
namespace {

bool cpu_has_avx2() {
#if defined(CTXSAFE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend choose_backend() {
  const char* env = std::getenv("CTXSAFE_SIMD");
  if (env != nullptr && std::string(env) == "scalar") return Backend::scalar;
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

}  // namespace

std::string_view backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

const KernelOps* ops_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &detail::scalar_ops();
    case Backend::avx2:
#ifdef CTXSAFE_HAVE_AVX2
      if (cpu_has_avx2()) return &detail::avx2_ops();
#endif
      return nullptr;
  }
  return nullptr;
}

Backend active_backend() {
  static const Backend chosen = choose_backend();
  return chosen;
}

const KernelOps& active_ops() {
  static const KernelOps& ops = *ops_for(active_backend());
  return ops;
}

}  // namespace ctxsafe::simd
