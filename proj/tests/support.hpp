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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polyframe/corpus/corpus.hpp"
#include "polyframe/llm/llm.hpp"
#include "polyframe/models/math.hpp"
#include "polyframe/models/trainer.hpp"

namespace polyframe::testing {

// ---------------------------------------------------------------------------
// Independent reference implementations used as oracles.

ConfidenceVector ref_softmax(const ScoreVector& y);
double ref_cross_entropy(const ScoreVector& y, Category t);

struct RefAdamW {
  long double theta = 0, m = 0, v = 0;
  int t = 0;
  void step(long double g, const AdamWHyper& h);
};

struct RefReport {
  double accuracy = 0, macro_f1 = 0, weighted_f1 = 0;
  std::array<double, kNumCategories> precision{}, recall{}, f1{};
};

RefReport ref_report(std::span<const Category> pred, std::span<const Category> gold);
// Chance agreement from all n^2 cross pairs.
double ref_kappa(std::span<const Category> a, std::span<const Category> b);
double ref_weighted_kappa(std::span<const Category> a, std::span<const Category> b, bool quadratic);

// Decision rule and grid search written from their definitions.
Category ref_decide(const ConfidenceAnswer& c, double k);
struct RefGrid {
  std::vector<double> accuracy, macro_f1;
  double best_k_accuracy = 0, best_k_macro_f1 = 0;
};
RefGrid ref_grid(std::span<const ScoredConfidence> scored);

// Central finite-difference check of d(loss)/d(theta_i) for a tiny double
// encoder; returns the worst relative error over `indices`.
double max_fd_relative_error(const SequenceClassifier<double>& net, std::span<const std::int32_t> ids, Category target,
                             std::span<const std::size_t> indices, double h = 1e-5);

// ---------------------------------------------------------------------------
// Synthetic data.

std::vector<Category> random_labels(std::uint64_t seed, std::size_t n, std::array<double, 3> weights = {1, 1, 1});

// Labeled examples with ids "t<i>", years spread over 2008..2023 and the
// second coder agreeing with probability `agree`.
LabeledSet synthetic_label_set(std::uint64_t seed, std::size_t n, double agree = 0.9,
                               std::array<double, 3> weights = {0.4, 0.2, 0.4});

// Short texts whose words reveal their class, for training smoke tests.
std::vector<TrainItem> keyword_items(std::uint64_t seed, std::size_t n);

EncoderConfig tiny_encoder_config(std::size_t vocab_size);

// Writes a random WordPiece checkpoint built from `texts` under `dir`.
std::filesystem::path write_tiny_checkpoint(const std::filesystem::path& dir, const std::vector<std::string>& texts,
                                            std::uint64_t seed = 7);

// Fresh temporary directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

// Directory holding the golden prompt files.
std::filesystem::path golden_dir();

}  // namespace polyframe::testing
