// Copyright 2026 The Polyframe Authors.
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

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "polyframe/corpus/types.hpp"

namespace polyframe {

using ScoreVector = std::array<double, kNumCategories>;
using ConfidenceVector = std::array<double, kNumCategories>;

// Max-subtracted softmax; finite for any finite input.
ConfidenceVector softmax(const ScoreVector& scores);

inline constexpr double kProbabilityFloor = 1e-12;

// -log p_t with p_t clamped to kProbabilityFloor.
double cross_entropy(const ConfidenceVector& p, Category target);

// Gradient of cross_entropy(softmax(y), t) with respect to y: p - onehot(t).
ScoreVector cross_entropy_grad(const ConfidenceVector& p, Category target);

Category argmax(const ConfidenceVector& p);

struct AdamWHyper {
  double learning_rate = 3e-5;  // alpha
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // lambda, applied as eta * lambda * theta
  double schedule = 1.0;      // eta_t

  void validate() const;  // throws ConfigError
};

// Moment accumulators stored at parameter precision.
template <typename T>
struct AdamWState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;

  explicit AdamWState(std::size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
};

// One decoupled-weight-decay Adam update:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   m' = m / (1 - b1^t),     v' = v / (1 - b2^t)
//   theta <- theta - eta (alpha m' / (sqrt(v') + eps) + lambda theta)
// Throws DataError when the spans disagree in size.
template <typename T>
void adamw_step(std::span<T> theta, std::span<const T> grad, AdamWState<T>& state, const AdamWHyper& h);

extern template void adamw_step<float>(std::span<float>, std::span<const float>, AdamWState<float>&,
                                       const AdamWHyper&);
extern template void adamw_step<double>(std::span<double>, std::span<const double>, AdamWState<double>&,
                                        const AdamWHyper&);

}  // namespace polyframe
