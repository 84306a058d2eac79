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

#include "polyframe/models/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "polyframe/common/error.hpp"
#include "polyframe/common/parallel.hpp"
#include "polyframe/common/rng.hpp"

namespace polyframe {

void ModelConfig::validate() const {
  if (model_name.empty()) throw ConfigError("model_name must not be empty");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  const std::pair<const char*, std::size_t> counts[] = {
      {"trials", trials},
      {"cross_val_folds", cross_val_folds},
      {"max_epochs", max_epochs},
      {"accumulate_grad_batches", accumulate_grad_batches},
      {"stopping_patience", stopping_patience},
      {"batch_size", batch_size},
  };
  for (const auto& [name, value] : counts) {
    if (value == 0) throw ConfigError(fmt::format("{} must be positive", name));
  }
  if (cross_val_folds < 2) throw ConfigError("cross_val_folds must be at least 2");
  if (max_seq_len < 2) throw ConfigError("max_seq_len must be at least 2");
}

bool ModelConfig::set(const config::Entry& e) {
  const auto& k = e.key;
  if (k == "model_name") {
    model_name = e.value;
  } else if (k == "dropout_p") {
    dropout_p = config::to_real(e);
  } else if (k == "trials") {
    trials = config::to_positive(e);
  } else if (k == "cross_val_folds") {
    cross_val_folds = config::to_positive(e);
  } else if (k == "learning_rate") {
    learning_rate = config::to_real(e);
  } else if (k == "max_epochs") {
    max_epochs = config::to_positive(e);
  } else if (k == "accumulate_grad_batches") {
    accumulate_grad_batches = config::to_positive(e);
  } else if (k == "stopping_patience") {
    stopping_patience = config::to_positive(e);
  } else if (k == "batch_size") {
    batch_size = config::to_positive(e);
  } else if (k == "global_seed") {
    global_seed = config::to_uint(e);
  } else if (k == "weight_decay") {
    weight_decay = config::to_real(e);
  } else if (k == "max_seq_len") {
    max_seq_len = config::to_positive(e);
  } else if (k == "label_source") {
    auto s = label_source_from_string(e.value);
    if (!s) throw ConfigError(fmt::format("label_source must be ar, mb or agree (got '{}')", e.value));
    label_source = *s;
  } else if (k == "class_weighting") {
    class_weighting = config::to_bool(e);
  } else if (k == "resplit_per_trial") {
    resplit_per_trial = config::to_bool(e);
  } else if (k == "threads") {
    threads = static_cast<std::size_t>(config::to_uint(e));
  } else if (k == "freeze_encoder") {
    freeze_encoder = config::to_bool(e);
  } else {
    return false;
  }
  return true;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"model_name", model_name},
          {"dropout_p", dropout_p},
          {"trials", trials},
          {"cross_val_folds", cross_val_folds},
          {"learning_rate", learning_rate},
          {"max_epochs", max_epochs},
          {"accumulate_grad_batches", accumulate_grad_batches},
          {"stopping_patience", stopping_patience},
          {"batch_size", batch_size},
          {"global_seed", global_seed},
          {"weight_decay", weight_decay},
          {"max_seq_len", max_seq_len},
          {"label_source", std::string(to_string(label_source))},
          {"class_weighting", class_weighting},
          {"resplit_per_trial", resplit_per_trial},
          {"threads", threads},
          {"freeze_encoder", freeze_encoder}};
}

std::vector<TrainItem> to_train_items(std::span<const LabeledExample> set, LabelSource source) {
  std::vector<TrainItem> out;
  out.reserve(set.size());
  for (const auto& e : set) out.push_back({e.tweet.id, e.tweet.text, label_of(e, source)});
  return out;
}

bool EarlyStopping::update(double score) {
  ++epochs_;
  last_improved_ = best_epoch_ == 0 || score > best_;
  if (last_improved_) {
    best_ = score;
    best_epoch_ = epochs_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"improved", r.improved}, {"validation", to_json(r.validation)}};
}

namespace {

MetricsReport score(const TextClassifier& model, std::span<const TrainItem> items, std::size_t threads,
                    std::vector<Category>* predictions = nullptr) {
  std::vector<Category> pred(items.size()), gold(items.size());
  parallel_for(items.size(), threads, [&](std::size_t, std::size_t i) {
    pred[i] = model.predict(items[i].text).label;
  });
  for (std::size_t i = 0; i < items.size(); ++i) gold[i] = items[i].label;
  auto report = classification_report(pred, gold);
  if (predictions) *predictions = std::move(pred);
  return report;
}

}  // namespace

TrainOutcome fine_tune(TextClassifier& model, std::span<const TrainItem> fit, std::span<const TrainItem> validate,
                       const ModelConfig& cfg, std::uint64_t seed, const TrainOptions& options) {
  cfg.validate();
  if (fit.empty()) throw DataError("fitting set is empty");
  if (validate.empty()) throw DataError("validation set is empty");
  auto& net = model.network();
  if (options.reinit_head) net.init_head(derive_seed(seed, "head"));

  // Token ids are fixed for the whole run.
  std::vector<std::vector<std::int32_t>> ids(fit.size());
  parallel_for(fit.size(), cfg.threads, [&](std::size_t, std::size_t i) { ids[i] = model.encode(fit[i].text); });

  auto& theta = net.parameters();
  const std::size_t n_params = theta.size();
  const std::size_t encoder_end = net.layout().head_offset();
  std::vector<float> grad(n_params, 0.0f);
  AdamWState<float> state(n_params);
  AdamWHyper hyper;
  hyper.learning_rate = cfg.learning_rate;
  hyper.weight_decay = cfg.learning_rate * cfg.weight_decay;
  hyper.validate();

  DropoutSpec drop;
  drop.hidden = net.config().hidden_dropout;
  drop.attention = net.config().attention_dropout;
  drop.head = cfg.dropout_p;
  const std::uint64_t dropout_base = derive_seed(seed, "dropout");

  Rng shuffle_rng(derive_seed(seed, "shuffle"));
  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t workers = worker_count(cfg.threads, cfg.batch_size);
  std::vector<std::vector<float>> worker_grads(workers > 1 ? workers : 0, std::vector<float>());
  std::vector<double> worker_loss(workers, 0.0);

  EarlyStopping stopper(cfg.stopping_patience);
  std::vector<float> best_params = theta;
  TrainOutcome outcome;
  bool checked_encoder = false;
  std::size_t pending_batches = 0;

  auto optimizer_step = [&] {
    if (cfg.freeze_encoder) std::fill(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(encoder_end), 0.0f);
    std::vector<float> before;
    if (!checked_encoder) before.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(encoder_end));
    if (cfg.freeze_encoder) {
      // Only the head moves.
      AdamWState<float> head_state(0);
      head_state.m.assign(state.m.begin() + static_cast<std::ptrdiff_t>(encoder_end), state.m.end());
      head_state.v.assign(state.v.begin() + static_cast<std::ptrdiff_t>(encoder_end), state.v.end());
      head_state.step = state.step;
      adamw_step<float>(std::span<float>(theta).subspan(encoder_end), std::span<const float>(grad).subspan(encoder_end),
                        head_state, hyper);
      std::copy(head_state.m.begin(), head_state.m.end(), state.m.begin() + static_cast<std::ptrdiff_t>(encoder_end));
      std::copy(head_state.v.begin(), head_state.v.end(), state.v.begin() + static_cast<std::ptrdiff_t>(encoder_end));
      state.step = head_state.step;
    } else {
      adamw_step<float>(theta, grad, state, hyper);
    }
    if (!checked_encoder) {
      const bool has_grad = std::any_of(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(encoder_end),
                                        [](float g) { return g != 0.0f; });
      const bool moved = !std::equal(before.begin(), before.end(), theta.begin());
      if (!has_grad || !moved) {
        throw Error("encoder parameters received no gradient update; a frozen encoder cannot be fine-tuned");
      }
      checked_encoder = true;
    }
    std::fill(grad.begin(), grad.end(), 0.0f);
    pending_batches = 0;
  };

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    double epoch_weight = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      double batch_weight = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        batch_weight += options.class_weights ? (*options.class_weights)[index_of(fit[order[b]].label)] : 1.0;
      }
      const double scale = 1.0 / (batch_weight * static_cast<double>(cfg.accumulate_grad_batches));
      std::fill(worker_loss.begin(), worker_loss.end(), 0.0);
      for (auto& g : worker_grads) {
        if (g.empty()) g.assign(n_params, 0.0f);
      }
      parallel_for(end - start, workers, [&](std::size_t w, std::size_t j) {
        const std::size_t i = order[start + j];
        const double weight = options.class_weights ? (*options.class_weights)[index_of(fit[i].label)] : 1.0;
        DropoutSpec d = drop;
        d.seed = splitmix64(dropout_base ^ splitmix64((static_cast<std::uint64_t>(epoch) << 32) + start + j));
        std::span<float> target = workers > 1 ? std::span<float>(worker_grads[w]) : std::span<float>(grad);
        worker_loss[w] += net.accumulate_gradient(ids[i], fit[i].label, weight, &d, target, scale);
      });
      for (auto& g : worker_grads) {
        for (std::size_t p = 0; p < n_params; ++p) grad[p] += g[p];
        std::fill(g.begin(), g.end(), 0.0f);
      }
      for (double l : worker_loss) epoch_loss += l;
      epoch_weight += batch_weight;
      if (++pending_batches == cfg.accumulate_grad_batches) optimizer_step();
    }
    if (pending_batches > 0) optimizer_step();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / epoch_weight;
    rec.validation = score(model, validate, cfg.threads);
    const bool stop = stopper.update(rec.validation.macro_f1);
    rec.improved = stopper.last_improved();
    if (rec.improved) best_params = theta;
    spdlog::info("epoch {}: train loss {:.4f}, validation macro F1 {:.4f}{}", epoch, rec.train_loss,
                 rec.validation.macro_f1, rec.improved ? " (best)" : "");
    if (options.on_epoch) options.on_epoch(rec);
    outcome.history.push_back(std::move(rec));
    if (stop) break;
  }
  theta = std::move(best_params);
  outcome.best_epoch = stopper.best_epoch();
  outcome.epochs_run = stopper.epochs();
  return outcome;
}

nlohmann::json to_json(const TrialResult& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : r.validation_history) history.push_back(to_json(e));
  nlohmann::json j{{"trial_index", r.trial_index},
                   {"seed", r.seed},
                   {"best_epoch", r.best_epoch},
                   {"epochs_run", r.epochs_run},
                   {"validation_history", std::move(history)},
                   {"test", to_json(r.test_report)}};
  if (r.fold) j["fold"] = *r.fold;
  return j;
}

TextClassifier load_configured_model(const ModelConfig& cfg, std::uint64_t head_seed) {
  return TextClassifier::load(resolve_checkpoint(cfg.model_name), cfg.max_seq_len, head_seed);
}

TrialResult run_trial(std::span<const TrainItem> fit, std::span<const TrainItem> validate,
                      std::span<const TrainItem> test, const ModelConfig& cfg, std::size_t trial_index,
                      const ModelLoader& loader, const TrainOptions& options) {
  TrialResult result;
  result.trial_index = trial_index;
  result.seed = cfg.global_seed + trial_index;
  TextClassifier model = loader(cfg, derive_seed(result.seed, "head"));
  auto outcome = fine_tune(model, fit, validate, cfg, result.seed, options);
  result.best_epoch = outcome.best_epoch;
  result.epochs_run = outcome.epochs_run;
  result.validation_history = std::move(outcome.history);
  if (!test.empty()) result.test_report = score(model, test, cfg.threads, &result.test_predictions);
  return result;
}

TrialResult TransformerTrialRunner::run(const TrialInputs& inputs, const ModelConfig& cfg, std::size_t trial_index) {
  TrainOptions options;
  if (on_epoch_) options.on_epoch = [&](const EpochRecord& r) { on_epoch_(trial_index, r); };
  return run_trial(inputs.fit, inputs.validate, inputs.test, cfg, trial_index, loader_, options);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / n);
  return out;
}

namespace {

nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.stddev}}; }

std::vector<LabeledExample> filter_agreement(std::vector<LabeledExample> set) {
  std::erase_if(set, [](const LabeledExample& e) { return e.label_ar != e.label_mb; });
  return set;
}

}  // namespace

nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) trials.push_back(to_json(t));
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& [coder, a] : r.aggregate) {
    agg[coder] = {{"accuracy", to_json(a.accuracy)},
                  {"macro_f1", to_json(a.macro_f1)},
                  {"weighted_f1", to_json(a.weighted_f1)}};
  }
  return {{"mode", r.mode == ExperimentMode::Holdout ? "holdout" : "cross_validation"},
          {"executions", r.trials.size()},
          {"aggregate", std::move(agg)},
          {"trials", std::move(trials)}};
}

ExperimentReport run_experiment(ExperimentMode mode, const ModelConfig& cfg, const SplitBundle& splits,
                                std::span<const LabeledExample> label_set, TrialRunner& runner,
                                const std::function<void(const TrialResult&)>& on_trial) {
  cfg.validate();
  ExperimentReport report;
  report.mode = mode;
  const bool agree = cfg.label_source == LabelSource::AgreeOnly;

  auto run_one = [&](std::size_t trial, std::optional<std::size_t> fold, const std::vector<LabeledExample>& fit,
                     const std::vector<LabeledExample>& validate, const std::vector<LabeledExample>& test) {
    TrialInputs in{to_train_items(fit, cfg.label_source), to_train_items(validate, cfg.label_source),
                   to_train_items(test, cfg.label_source)};
    spdlog::info("trial {}{}: fit {}, validate {}, test {}", trial, fold ? fmt::format(" fold {}", *fold) : "",
                 in.fit.size(), in.validate.size(), in.test.size());
    TrialResult r = runner.run(in, cfg, trial);
    r.fold = fold;
    if (r.test_predictions.size() != test.size()) {
      throw Error(fmt::format("trial {} returned {} test predictions for {} test examples", trial,
                              r.test_predictions.size(), test.size()));
    }
    for (LabelSource coder : {LabelSource::Ar, LabelSource::Mb}) {
      std::vector<Category> gold;
      for (const auto& e : test) gold.push_back(label_of(e, coder));
      report.per_coder[std::string(to_string(coder))].push_back(classification_report(r.test_predictions, gold));
    }
    if (on_trial) on_trial(r);
    report.trials.push_back(std::move(r));
  };

  if (mode == ExperimentMode::Holdout) {
    const auto test = select(label_set, splits.at("TEST"));
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      std::vector<LabeledExample> fit, validate;
      if (cfg.resplit_per_trial) {
        const auto& parent = splits.at(agree ? "TRAIN_AGREE" : "TRAIN");
        const auto members = select(label_set, parent);
        std::vector<StratItem> items;
        for (const auto& e : members) items.push_back({e.tweet.id, label_of(e, cfg.label_source)});
        const std::array<double, 2> fractions{0.8, 0.2};
        const std::array<std::string, 2> names{"FIT", "VALIDATE"};
        auto parts = stratified_split(parent, items, fractions, names, derive_seed(cfg.global_seed + t, "RESPLIT"));
        fit = select(label_set, parts[0]);
        validate = select(label_set, parts[1]);
      } else {
        fit = select(label_set, splits.at(agree ? "FIT_AGREE" : "FIT"));
        validate = select(label_set, splits.at(agree ? "VALIDATE_AGREE" : "VALIDATE"));
      }
      run_one(t, std::nullopt, fit, validate, test);
    }
  } else {
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      for (std::size_t f = 0; f < cfg.cross_val_folds; ++f) {
        auto fit = select(label_set, splits.at(fmt::format("CROSS_FIT[{}]", f)));
        auto validate = select(label_set, splits.at(fmt::format("CROSS_VALIDATE[{}]", f)));
        const auto test = select(label_set, splits.at(fmt::format("CROSS_TEST[{}]", f)));
        if (agree) {
          fit = filter_agreement(std::move(fit));
          validate = filter_agreement(std::move(validate));
        }
        run_one(t, f, fit, validate, test);
      }
    }
  }

  for (const auto& [coder, reports] : report.per_coder) {
    std::vector<double> acc, mf1, wf1;
    for (const auto& r : reports) {
      acc.push_back(r.accuracy);
      mf1.push_back(r.macro_f1);
      wf1.push_back(r.weighted_f1);
    }
    report.aggregate[coder] = {mean_std(acc), mean_std(mf1), mean_std(wf1)};
  }
  return report;
}

}  // namespace polyframe
