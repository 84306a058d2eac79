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

#include "polyframe/models/math.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "polyframe/common/error.hpp"

namespace polyframe {

ConfidenceVector softmax(const ScoreVector& scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  ConfidenceVector p{};
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double cross_entropy(const ConfidenceVector& p, Category target) {
  return -std::log(std::max(p[index_of(target)], kProbabilityFloor));
}

ScoreVector cross_entropy_grad(const ConfidenceVector& p, Category target) {
  ScoreVector g = p;
  g[index_of(target)] -= 1.0;
  return g;
}

Category argmax(const ConfidenceVector& p) {
  return category_at(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
}

void AdamWHyper::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
}

template <typename T>
void adamw_step(std::span<T> theta, std::span<const T> grad, AdamWState<T>& state, const AdamWHyper& h) {
  if (theta.size() != grad.size() || theta.size() != state.m.size() || theta.size() != state.v.size()) {
    throw DataError(fmt::format("adamw_step shape mismatch: theta {}, grad {}, m {}, v {}", theta.size(), grad.size(),
                                state.m.size(), state.v.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double m = h.beta1 * static_cast<double>(state.m[i]) + (1.0 - h.beta1) * g;
    const double v = h.beta2 * static_cast<double>(state.v[i]) + (1.0 - h.beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    const double th = static_cast<double>(theta[i]);
    theta[i] = static_cast<T>(th - h.schedule * (h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon) +
                                                 h.weight_decay * th));
  }
}

template void adamw_step<float>(std::span<float>, std::span<const float>, AdamWState<float>&, const AdamWHyper&);
template void adamw_step<double>(std::span<double>, std::span<const double>, AdamWState<double>&,
                                 const AdamWHyper&);

}  // namespace polyframe
