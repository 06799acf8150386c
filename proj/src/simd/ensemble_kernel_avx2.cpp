// Copyright 2026 The qlqg Authors
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

#include "qlqg/simd/ensemble_kernel.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define QLQG_HAVE_X86 1
#else
#define QLQG_HAVE_X86 0
#endif

namespace qlqg::simd {

#if QLQG_HAVE_X86

__attribute__((target("avx2"))) void step_avx2(const StepMatrices& mats, double* x,
                                               const double* dw, double* cost_acc) {
  const int n = mats.n;
  const int m = mats.m;
  __m256d xv[kMaxDim];
  for (int i = 0; i < n; ++i) xv[i] = _mm256_loadu_pd(x + i * kLanes);

  if (cost_acc != nullptr) {
    __m256d q = _mm256_setzero_pd();
    for (int i = 0; i < n; ++i) {
      __m256d s = _mm256_setzero_pd();
      for (int j = 0; j < n; ++j) {
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_set1_pd(mats.cost[i * n + j]), xv[j]));
      }
      q = _mm256_add_pd(q, _mm256_mul_pd(xv[i], s));
    }
    _mm256_storeu_pd(cost_acc, _mm256_add_pd(_mm256_loadu_pd(cost_acc), q));
  }

  for (int i = 0; i < n; ++i) {
    __m256d acc = _mm256_setzero_pd();
    for (int j = 0; j < n; ++j) {
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(mats.transition[i * n + j]), xv[j]));
    }
    for (int k = 0; k < m; ++k) {
      acc = _mm256_add_pd(
          acc, _mm256_mul_pd(_mm256_set1_pd(mats.gain[i * m + k]), _mm256_loadu_pd(dw + k * kLanes)));
    }
    _mm256_storeu_pd(x + i * kLanes, acc);
  }
}

#else

void step_avx2(const StepMatrices& mats, double* x, const double* dw, double* cost_acc) {
  step_scalar(mats, x, dw, cost_acc);
}

#endif

}  // namespace qlqg::simd
