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
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "polyframe/common/config.hpp"
#include "polyframe/metrics/metrics.hpp"
#include "polyframe/models/trainer.hpp"

namespace polyframe {

using ClassWeights = std::array<double, kNumCategories>;

// weight_c = n / (3 * support_c). Throws DataError when a class is absent.
ClassWeights compute_class_weights(std::span<const Category> labels);

struct ThresholdSchedule {
  double current = 1.0;
  double step = 0.05;
  double floor = 0.7;
  // Fixed thresholds for individual classes; other classes follow `current`.
  std::map<Category, double> per_class_overrides;

  void validate() const;  // throws ConfigError
  double threshold_for(Category c) const;
};

struct ScheduleStep {
  ThresholdSchedule next;
  bool terminate = false;
};

// One decrement after an admission, two after an empty one, clamped at the
// floor (values are rounded to 1e-9). An empty admission while already at the
// floor terminates.
ScheduleStep next_threshold(const ThresholdSchedule& sched, bool any_admitted);

struct ScoredItem {
  std::string id;
  Prediction prediction;
};

struct PseudoLabel {
  std::string tweet_id;
  Category label = Category::Other;
  double confidence = 0.0;
};

struct PseudoLabelBatch {
  std::size_t iteration = 0;
  std::vector<PseudoLabel> entries;  // by class, then confidence descending, then id
  std::array<double, kNumCategories> class_distribution{};  // fractions of the batch

  bool empty() const { return entries.empty(); }
};

// Admits predictions whose top confidence reaches the applicable threshold,
// skipping ids in `already_admitted`; per class keeps the most confident up
// to the quota (ties by id).
PseudoLabelBatch select_pseudo_labels(std::span<const ScoredItem> preds, const ThresholdSchedule& sched,
                                      const std::map<Category, std::size_t>& quotas,
                                      const std::unordered_set<std::string>& already_admitted,
                                      std::size_t iteration = 0);

struct SelfTrainConfig {
  double start_threshold = 1.0;
  double step = 0.05;
  double floor = 0.7;
  std::map<Category, double> per_class_thresholds;
  std::map<Category, std::size_t> quotas;
  // Unlabeled tweets scored per iteration; 0 scores the whole pool.
  std::size_t unlabeled_cap = 0;
  bool class_weighting = true;
  // Pick the best iteration on a held-out VALIDATE set instead of TEST.
  bool select_on_validate = false;
  // Continue from the previous iteration's weights instead of the checkpoint.
  bool incremental = false;
  std::size_t max_iterations = 50;

  ThresholdSchedule schedule() const;
  void validate() const;
  // Keys are given without the "selftrain." prefix.
  bool set(const config::Entry& entry);
  nlohmann::json to_json() const;
};

struct PoolItem {
  Tweet tweet;
  Category label = Category::Other;
  double confidence = 1.0;
  bool pseudo = false;
  std::size_t iteration = 0;  // admission iteration; 0 for expert labels
};

// Model-side operations the controller drives.
class SelfTrainBackend {
 public:
  virtual ~SelfTrainBackend() = default;
  virtual void train(std::span<const PoolItem> pool, const std::optional<ClassWeights>& weights,
                     std::size_t iteration) = 0;
  virtual std::vector<Prediction> predict(std::span<const Tweet> tweets) = 0;
  // The current model is the best so far; keep it.
  virtual void mark_best() {}
  // Make the kept model current again.
  virtual void restore_best() {}
};

struct IterationRecord {
  std::size_t iteration = 0;
  double threshold = 0.0;
  std::map<Category, double> per_class_thresholds;
  bool retrained = false;
  std::size_t trained_on = 0;  // pool size the evaluated model was trained on
  std::size_t scored = 0;      // unlabeled tweets scored
  std::array<std::size_t, kNumCategories> admitted_per_class{};
  std::array<double, kNumCategories> mean_confidence_per_class{};
  std::size_t labeled_pool = 0;    // after admission
  std::size_t unlabeled_pool = 0;  // after admission
  MetricsReport test_metrics;
  std::optional<MetricsReport> validate_metrics;
  std::vector<PseudoLabel> admitted;

  std::size_t admitted_total() const;
};

nlohmann::json to_json(const IterationRecord& r);

struct SelfTrainResult {
  std::vector<IterationRecord> history;
  std::size_t best_iteration = 0;
  std::vector<PoolItem> labeled_pool;
  std::vector<Tweet> unlabeled_pool;
  bool terminated_at_floor = false;
};

// Iterates train / evaluate / score / admit / decay until an empty admission
// at the floor, an exhausted pool or max_iterations. The backend ends holding
// the best iteration's model. Throws DataError when TEST or VALIDATE overlaps
// the pools; backend failures propagate after `on_iteration` has seen every
// completed iteration.
SelfTrainResult run_self_training(std::span<const LabeledExample> label_set, std::span<const Tweet> unlabel_set,
                                  std::span<const LabeledExample> test_set, std::span<const LabeledExample> validate_set,
                                  LabelSource source, const SelfTrainConfig& cfg, std::uint64_t seed,
                                  SelfTrainBackend& backend,
                                  const std::function<void(const IterationRecord&)>& on_iteration = {});

// tweet_id, label, confidence, source ("expert" or "pseudo"), iteration.
void write_pool_csv(std::ostream& out, std::span<const PoolItem> pool);

// Transformer backend: every iteration fine-tunes the configured checkpoint
// (or the previous weights when incremental) on a stratified 80/20
// fit/validate split of the pool.
class TransformerSelfTrainBackend final : public SelfTrainBackend {
 public:
  TransformerSelfTrainBackend(ModelConfig cfg, bool incremental, ModelLoader loader = load_configured_model);

  void train(std::span<const PoolItem> pool, const std::optional<ClassWeights>& weights,
             std::size_t iteration) override;
  std::vector<Prediction> predict(std::span<const Tweet> tweets) override;
  void mark_best() override;
  void restore_best() override;

  TextClassifier& model();

 private:
  ModelConfig cfg_;
  bool incremental_;
  ModelLoader loader_;
  std::optional<TextClassifier> model_;
  std::vector<float> best_;
};

}  // namespace polyframe
