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

#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "polyframe/corpus/types.hpp"
#include "polyframe/metrics/metrics.hpp"
#include "polyframe/models/math.hpp"

namespace polyframe {

// Maps author ids to one-hot slots; slot 0 is the unknown-author bucket.
class AuthorIndex {
 public:
  AuthorIndex() = default;
  explicit AuthorIndex(std::span<const Tweet> tweets);

  std::size_t slot(const std::string& author_id) const;
  std::size_t slots() const { return slots_.size() + 1; }

 private:
  std::unordered_map<std::string, std::size_t> slots_;
};

inline constexpr int kYearMin = 2008;
inline constexpr int kYearMax = 2023;

// [ (year - 2008) / 15 ] followed by one-hot(author slot).
std::vector<double> featurize_baseline(const Tweet& tweet, const AuthorIndex& authors);

struct BaselineExample {
  Tweet tweet;
  Category label = Category::Other;
};

enum class BaselineKind { LogReg, GbTree };

struct LogRegParams {
  double l2 = 1e-3;
  std::size_t iterations = 400;
  double learning_rate = 0.05;
};

struct GbTreeParams {
  std::size_t rounds = 60;
  std::size_t max_depth = 3;
  double eta = 0.3;
  double lambda = 1.0;
  double min_child_weight = 1.0;
};

class BaselineModel {
 public:
  virtual ~BaselineModel() = default;
  virtual ConfidenceVector predict(const Tweet& tweet) const = 0;
};

// Multinomial logistic regression over the baseline features.
std::unique_ptr<BaselineModel> train_logreg(std::span<const BaselineExample> fit, const LogRegParams& params = {});

// Softmax-objective gradient-boosted regression trees (one tree per class per
// round, second-order gain with L2 leaf regularisation).
std::unique_ptr<BaselineModel> train_gbtree(std::span<const BaselineExample> fit, const GbTreeParams& params = {});

struct BaselineResult {
  std::unique_ptr<BaselineModel> model;
  MetricsReport validation;
  std::string chosen;  // description of the selected hyperparameters
};

// Trains every grid point on `fit` and keeps the best validation macro F1.
// Throws DataError for an empty or single-class fit set.
BaselineResult train_baseline(BaselineKind kind, std::span<const BaselineExample> fit,
                              std::span<const BaselineExample> validate);

MetricsReport evaluate_baseline(const BaselineModel& model, std::span<const BaselineExample> data);

}  // namespace polyframe
