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

namespace qlqg::simd {

void step_scalar(const StepMatrices& mats, double* x, const double* dw, double* cost_acc) {
  const int n = mats.n;
  const int m = mats.m;
  for (int lane = 0; lane < kLanes; ++lane) {
    if (cost_acc != nullptr) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s = s + mats.cost[i * n + j] * x[j * kLanes + lane];
        q = q + x[i * kLanes + lane] * s;
      }
      cost_acc[lane] = cost_acc[lane] + q;
    }
    double next[kMaxDim];
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc = acc + mats.transition[i * n + j] * x[j * kLanes + lane];
      for (int k = 0; k < m; ++k) acc = acc + mats.gain[i * m + k] * dw[k * kLanes + lane];
      next[i] = acc;
    }
    for (int i = 0; i < n; ++i) x[i * kLanes + lane] = next[i];
  }
}

}  // namespace qlqg::simd
