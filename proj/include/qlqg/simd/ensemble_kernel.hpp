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

#pragma once

// Ensemble step kernel for the conditional-mean SDE. One call advances a
// block of kLanes trajectories by one Euler-Maruyama step:
//
//   cost_acc[l] += x_l^T P x_l                 (if cost_acc != nullptr)
//   x_l         <- T x_l + G dw_l
//
// with T = I + dt * M_drift and G the (time-dependent) noise gain. Data is
// structure-of-arrays: component i of lane l lives at x[i * kLanes + l].
//
// Every variant performs the same sequence of IEEE multiplies and adds per
// lane (no fused multiply-add), so results are bit-identical across variants.

#include <string_view>

namespace qlqg::simd {

inline constexpr int kLanes = 4;
inline constexpr int kMaxDim = 16;

struct StepMatrices {
  int n = 0;                        // state dimension 2N
  int m = 0;                        // noise dimension 2L
  const double* transition = nullptr;  // n x n, row-major
  const double* gain = nullptr;        // n x m, row-major
  const double* cost = nullptr;        // n x n, row-major, symmetric
};

using StepKernel = void (*)(const StepMatrices& mats, double* x, const double* dw,
                            double* cost_acc);

enum class Isa { scalar, avx2 };

void step_scalar(const StepMatrices& mats, double* x, const double* dw, double* cost_acc);
void step_avx2(const StepMatrices& mats, double* x, const double* dw, double* cost_acc);

bool isa_available(Isa isa);

// Best available variant; the QLQG_KERNEL environment variable ("scalar" or
// "avx2") overrides the choice when that variant is available.
Isa detect_isa();

StepKernel kernel_for(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace qlqg::simd
