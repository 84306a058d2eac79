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
#include <cstddef>
#include <iosfwd>
#include <span>

#include <json.hpp>

#include "polyframe/corpus/types.hpp"

namespace polyframe {

// Rows are the true label, columns the predicted label.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumCategories>, kNumCategories> counts{};

  std::size_t total() const;
  std::size_t trace() const;
  std::size_t at(Category gold, Category pred) const { return counts[index_of(gold)][index_of(pred)]; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  // Set when a zero denominator forced a value to 0.
  bool zero_division = false;
};

struct MetricsReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::array<ClassMetrics, kNumCategories> per_class{};
  ConfusionMatrix confusion;
  // Any class absent from both predictions and gold labels.
  bool has_absent_class = false;
};

// Throws DataError when the lengths differ or the input is empty.
ConfusionMatrix confusion_matrix(std::span<const Category> pred, std::span<const Category> gold);
MetricsReport classification_report(std::span<const Category> pred, std::span<const Category> gold);
MetricsReport report_from_confusion(const ConfusionMatrix& cm);

enum class KappaWeights { Linear, Quadratic };

struct KappaResult {
  double value = 0.0;
  // Chance agreement was 1, so the ratio is undefined and a convention applied.
  bool degenerate = false;
};

KappaResult cohen_kappa(std::span<const Category> a, std::span<const Category> b);
KappaResult weighted_kappa(std::span<const Category> a, std::span<const Category> b, KappaWeights weights);
double percent_agreement(std::span<const Category> a, std::span<const Category> b);

struct AgreementReport {
  std::size_t n = 0;
  double percent_agreement = 0.0;  // fraction in [0, 1]
  double kappa = 0.0;
  double weighted_kappa = 0.0;
  KappaWeights weights = KappaWeights::Linear;
  bool degenerate = false;
  // Second rater scored against the first.
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
};

AgreementReport agreement_report(std::span<const Category> a, std::span<const Category> b,
                                 KappaWeights weights = KappaWeights::Linear);

nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const AgreementReport& r);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);

}  // namespace polyframe
