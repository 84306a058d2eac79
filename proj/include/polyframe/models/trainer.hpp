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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyframe/common/config.hpp"
#include "polyframe/metrics/metrics.hpp"
#include "polyframe/models/classifier.hpp"
#include "polyframe/partition/partition.hpp"

namespace polyframe {

struct ModelConfig {
  std::string model_name = "vinai/bertweet-base";
  double dropout_p = 0.1;
  std::size_t trials = 20;
  std::size_t cross_val_folds = 7;
  double learning_rate = 3e-5;
  std::size_t max_epochs = 25;
  std::size_t accumulate_grad_batches = 1;
  std::size_t stopping_patience = 3;
  std::size_t batch_size = 64;
  std::uint64_t global_seed = 2025;

  // Decoupled weight-decay coefficient, PyTorch convention: each step shrinks
  // theta by learning_rate * weight_decay * theta.
  double weight_decay = 0.01;
  std::size_t max_seq_len = 128;
  LabelSource label_source = LabelSource::Ar;
  bool class_weighting = false;
  // Draw a fresh stratified 80/20 FIT/VALIDATE split of TRAIN for every trial
  // instead of using the FIT/VALIDATE manifests.
  bool resplit_per_trial = false;
  std::size_t threads = 0;
  // Keeps encoder weights fixed; training then stops with an error because
  // the encoder must receive gradient updates.
  bool freeze_encoder = false;

  void validate() const;  // throws ConfigError
  // Applies one key; returns false for a key this config does not own.
  bool set(const config::Entry& entry);
  nlohmann::json to_json() const;
};

struct TrainItem {
  std::string id;
  std::string text;
  Category label = Category::Other;
};

// Training targets of `set` under `source`.
std::vector<TrainItem> to_train_items(std::span<const LabeledExample> set, LabelSource source);

// Tracks validation scores; an epoch improves only on a strictly higher score.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Records the next epoch's score and returns true when training should halt.
  bool update(double score);
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based; 0 before any update
  double best_score() const { return best_; }
  std::size_t epochs() const { return epochs_; }
  bool last_improved() const { return last_improved_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = 0.0;
  bool last_improved_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  MetricsReport validation;
  bool improved = false;
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainOptions {
  // Per-class loss multipliers (index_of order); unset means unweighted.
  std::optional<std::array<double, kNumCategories>> class_weights;
  bool reinit_head = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainOutcome {
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<EpochRecord> history;
};

// Fine-tunes `model` in place: per epoch, shuffle `fit`, step AdamW every
// accumulate_grad_batches batches, score `validate`, stop after
// stopping_patience epochs without a macro-F1 gain, then restore the best
// epoch's parameters. Throws Error if the encoder receives no update.
TrainOutcome fine_tune(TextClassifier& model, std::span<const TrainItem> fit, std::span<const TrainItem> validate,
                       const ModelConfig& cfg, std::uint64_t seed, const TrainOptions& options = {});

struct TrialResult {
  std::size_t trial_index = 0;
  std::optional<std::size_t> fold;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<EpochRecord> validation_history;
  MetricsReport test_report;  // against the training label source
  std::vector<Category> test_predictions;
};

nlohmann::json to_json(const TrialResult& r);

// Loads the checkpoint named by cfg.model_name. Tests may substitute their own.
using ModelLoader = std::function<TextClassifier(const ModelConfig&, std::uint64_t head_seed)>;
TextClassifier load_configured_model(const ModelConfig& cfg, std::uint64_t head_seed);

// One Trial with seed = global_seed + trial_index.
TrialResult run_trial(std::span<const TrainItem> fit, std::span<const TrainItem> validate,
                      std::span<const TrainItem> test, const ModelConfig& cfg, std::size_t trial_index,
                      const ModelLoader& loader = load_configured_model, const TrainOptions& options = {});

struct TrialInputs {
  std::vector<TrainItem> fit;
  std::vector<TrainItem> validate;
  std::vector<TrainItem> test;
};

class TrialRunner {
 public:
  virtual ~TrialRunner() = default;
  virtual TrialResult run(const TrialInputs& inputs, const ModelConfig& cfg, std::size_t trial_index) = 0;
};

class TransformerTrialRunner final : public TrialRunner {
 public:
  explicit TransformerTrialRunner(ModelLoader loader = load_configured_model,
                                  std::function<void(std::size_t, const EpochRecord&)> on_epoch = {})
      : loader_(std::move(loader)), on_epoch_(std::move(on_epoch)) {}

  TrialResult run(const TrialInputs& inputs, const ModelConfig& cfg, std::size_t trial_index) override;

 private:
  ModelLoader loader_;
  std::function<void(std::size_t, const EpochRecord&)> on_epoch_;
};

enum class ExperimentMode { Holdout, CrossValidation };

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> values);

struct CoderAggregate {
  MeanStd accuracy;
  MeanStd macro_f1;
  MeanStd weighted_f1;
};

struct ExperimentReport {
  ExperimentMode mode = ExperimentMode::Holdout;
  std::vector<TrialResult> trials;  // ordered by (trial, fold)
  // Test predictions scored against each coder: "ar" and "mb".
  std::map<std::string, std::vector<MetricsReport>> per_coder;
  std::map<std::string, CoderAggregate> aggregate;
};

nlohmann::json to_json(const ExperimentReport& r);

// Holdout: cfg.trials trials on FIT/VALIDATE/TEST (the *_AGREE variants for
// the agreement label source). Cross-validation: trials x folds executions on
// CROSS_FIT[f]/CROSS_VALIDATE[f]/CROSS_TEST[f]. Throws DataError when a
// required split is missing.
ExperimentReport run_experiment(ExperimentMode mode, const ModelConfig& cfg, const SplitBundle& splits,
                                std::span<const LabeledExample> label_set, TrialRunner& runner,
                                const std::function<void(const TrialResult&)>& on_trial = {});

}  // namespace polyframe
