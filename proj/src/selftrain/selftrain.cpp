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

#include "polyframe/selftrain/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "polyframe/common/csv.hpp"
#include "polyframe/common/error.hpp"
#include "polyframe/common/rng.hpp"
#include "polyframe/common/text.hpp"

namespace polyframe {

ClassWeights compute_class_weights(std::span<const Category> labels) {
  std::array<std::size_t, kNumCategories> support{};
  for (auto c : labels) ++support[index_of(c)];
  ClassWeights w{};
  const double n = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (support[c] == 0) {
      throw DataError(fmt::format("class weights need every class; '{}' is absent", category_name(category_at(c))));
    }
    w[c] = n / (static_cast<double>(kNumCategories) * static_cast<double>(support[c]));
  }
  return w;
}

namespace {

double round9(double x) { return std::round(x * 1e9) / 1e9; }

}  // namespace

void ThresholdSchedule::validate() const {
  if (!(step > 0.0)) throw ConfigError("threshold step must be positive");
  if (!(floor >= 0.0 && floor <= 1.0)) throw ConfigError("threshold floor must be in [0, 1]");
  if (!(current >= floor && current <= 1.0)) throw ConfigError("threshold must lie in [floor, 1]");
  for (const auto& [c, t] : per_class_overrides) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw ConfigError(fmt::format("threshold for class {} must be in [0, 1]", code_of(c)));
    }
  }
}

double ThresholdSchedule::threshold_for(Category c) const {
  auto it = per_class_overrides.find(c);
  return it == per_class_overrides.end() ? current : it->second;
}

ScheduleStep next_threshold(const ThresholdSchedule& sched, bool any_admitted) {
  ScheduleStep out{sched, false};
  const bool at_floor = round9(sched.current) <= round9(sched.floor);
  if (!any_admitted && at_floor) {
    out.terminate = true;
    return out;
  }
  const double drop = any_admitted ? sched.step : 2.0 * sched.step;
  out.next.current = std::max(round9(sched.current - drop), round9(sched.floor));
  return out;
}

PseudoLabelBatch select_pseudo_labels(std::span<const ScoredItem> preds, const ThresholdSchedule& sched,
                                      const std::map<Category, std::size_t>& quotas,
                                      const std::unordered_set<std::string>& already_admitted, std::size_t iteration) {
  std::array<std::vector<PseudoLabel>, kNumCategories> by_class;
  for (const auto& p : preds) {
    if (already_admitted.contains(p.id)) continue;
    const Category c = p.prediction.label;
    const double conf = p.prediction.top_confidence();
    if (conf >= sched.threshold_for(c)) by_class[index_of(c)].push_back({p.id, c, conf});
  }
  PseudoLabelBatch batch;
  batch.iteration = iteration;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    auto& v = by_class[c];
    std::sort(v.begin(), v.end(), [](const PseudoLabel& a, const PseudoLabel& b) {
      return a.confidence != b.confidence ? a.confidence > b.confidence : a.tweet_id < b.tweet_id;
    });
    if (auto q = quotas.find(category_at(c)); q != quotas.end() && v.size() > q->second) v.resize(q->second);
    batch.entries.insert(batch.entries.end(), v.begin(), v.end());
  }
  if (!batch.entries.empty()) {
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      batch.class_distribution[c] = static_cast<double>(by_class[c].size()) / static_cast<double>(batch.entries.size());
    }
  }
  return batch;
}

ThresholdSchedule SelfTrainConfig::schedule() const {
  ThresholdSchedule s;
  s.current = start_threshold;
  s.step = step;
  s.floor = floor;
  s.per_class_overrides = per_class_thresholds;
  return s;
}

void SelfTrainConfig::validate() const {
  schedule().validate();
  if (max_iterations == 0) throw ConfigError("selftrain.max_iterations must be positive");
}

namespace {

Category class_from_key_suffix(const config::Entry& e, std::string_view prefix) {
  const auto suffix = std::string_view(e.key).substr(prefix.size());
  int code = 0;
  if (suffix.size() == 1 && suffix[0] >= '1' && suffix[0] <= '3') code = suffix[0] - '0';
  auto c = category_from_code(code);
  if (!c) throw ConfigError(fmt::format("{}: class must be 1, 2 or 3", e.key));
  return *c;
}

}  // namespace

bool SelfTrainConfig::set(const config::Entry& e) {
  const auto& k = e.key;
  if (k == "start_threshold") {
    start_threshold = config::to_real(e);
  } else if (k == "step") {
    step = config::to_real(e);
  } else if (k == "floor") {
    floor = config::to_real(e);
  } else if (k.starts_with("threshold.")) {
    per_class_thresholds[class_from_key_suffix(e, "threshold.")] = config::to_real(e);
  } else if (k.starts_with("quota.")) {
    quotas[class_from_key_suffix(e, "quota.")] = static_cast<std::size_t>(config::to_uint(e));
  } else if (k == "unlabeled_cap") {
    unlabeled_cap = static_cast<std::size_t>(config::to_uint(e));
  } else if (k == "class_weighting") {
    class_weighting = config::to_bool(e);
  } else if (k == "select_on_validate") {
    select_on_validate = config::to_bool(e);
  } else if (k == "incremental") {
    incremental = config::to_bool(e);
  } else if (k == "max_iterations") {
    max_iterations = config::to_positive(e);
  } else {
    return false;
  }
  return true;
}

nlohmann::json SelfTrainConfig::to_json() const {
  nlohmann::json thresholds = nlohmann::json::object(), q = nlohmann::json::object();
  for (const auto& [c, t] : per_class_thresholds) thresholds[std::to_string(code_of(c))] = t;
  for (const auto& [c, n] : quotas) q[std::to_string(code_of(c))] = n;
  return {{"start_threshold", start_threshold}, {"step", step},
          {"floor", floor},                     {"per_class_thresholds", thresholds},
          {"quotas", q},                        {"unlabeled_cap", unlabeled_cap},
          {"class_weighting", class_weighting}, {"select_on_validate", select_on_validate},
          {"incremental", incremental},         {"max_iterations", max_iterations}};
}

std::size_t IterationRecord::admitted_total() const {
  std::size_t n = 0;
  for (auto a : admitted_per_class) n += a;
  return n;
}

nlohmann::json to_json(const IterationRecord& r) {
  nlohmann::json admitted = nlohmann::json::object(), mean_conf = nlohmann::json::object(),
                 overrides = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto key = std::to_string(code_of(category_at(c)));
    admitted[key] = r.admitted_per_class[c];
    mean_conf[key] = r.mean_confidence_per_class[c];
  }
  for (const auto& [c, t] : r.per_class_thresholds) overrides[std::to_string(code_of(c))] = t;
  nlohmann::json j{{"iteration", r.iteration},
                   {"threshold", r.threshold},
                   {"per_class_thresholds", overrides},
                   {"retrained", r.retrained},
                   {"scored", r.scored},
                   {"admitted_per_class", admitted},
                   {"mean_confidence_per_class", mean_conf},
                   {"pool_sizes",
                    {{"trained_on", r.trained_on}, {"labeled", r.labeled_pool}, {"unlabeled", r.unlabeled_pool}}},
                   {"test_metrics", to_json(r.test_metrics)}};
  if (r.validate_metrics) j["validate_metrics"] = to_json(*r.validate_metrics);
  return j;
}

namespace {

MetricsReport evaluate(SelfTrainBackend& backend, std::span<const LabeledExample> set, LabelSource source) {
  std::vector<Tweet> tweets;
  std::vector<Category> gold;
  for (const auto& e : set) {
    tweets.push_back(e.tweet);
    gold.push_back(label_of(e, source));
  }
  const auto preds = backend.predict(tweets);
  if (preds.size() != tweets.size()) throw Error("backend returned the wrong number of predictions");
  std::vector<Category> pred;
  for (const auto& p : preds) pred.push_back(p.label);
  return classification_report(pred, gold);
}

}  // namespace

SelfTrainResult run_self_training(std::span<const LabeledExample> label_set, std::span<const Tweet> unlabel_set,
                                  std::span<const LabeledExample> test_set, std::span<const LabeledExample> validate_set,
                                  LabelSource source, const SelfTrainConfig& cfg, std::uint64_t seed,
                                  SelfTrainBackend& backend,
                                  const std::function<void(const IterationRecord&)>& on_iteration) {
  cfg.validate();
  if (test_set.empty()) throw DataError("self-training needs a nonempty TEST set");
  if (cfg.select_on_validate && validate_set.empty()) {
    throw ConfigError("selftrain.select_on_validate requires a VALIDATE set");
  }

  SelfTrainResult result;
  std::unordered_set<std::string> pool_ids, held_out;
  for (const auto& e : label_set) {
    if (!pool_ids.insert(e.tweet.id).second) throw DataError(fmt::format("duplicate labeled id {}", e.tweet.id));
    result.labeled_pool.push_back({e.tweet, label_of(e, source), 1.0, false, 0});
  }
  for (const auto& t : unlabel_set) {
    if (!pool_ids.insert(t.id).second) {
      throw DataError(fmt::format("tweet {} is in both the labeled and unlabeled pools", t.id));
    }
  }
  for (const auto* set : {&test_set, &validate_set}) {
    for (const auto& e : *set) {
      if (pool_ids.contains(e.tweet.id)) {
        throw DataError(fmt::format("held-out tweet {} also appears in the training pools", e.tweet.id));
      }
      held_out.insert(e.tweet.id);
    }
  }
  result.unlabeled_pool.assign(unlabel_set.begin(), unlabel_set.end());
  const std::size_t total = result.labeled_pool.size() + result.unlabeled_pool.size();

  ThresholdSchedule sched = cfg.schedule();
  std::unordered_set<std::string> admitted_ids;
  bool need_train = true;
  double best_score = -1.0;
  std::size_t trained_on = 0;
  MetricsReport test_report;
  std::optional<MetricsReport> validate_report;
  std::vector<ScoredItem> cached_scores;

  for (std::size_t iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
    IterationRecord rec;
    rec.iteration = iteration;
    rec.threshold = sched.current;
    rec.per_class_thresholds = sched.per_class_overrides;

    if (need_train) {
      for (const auto& item : result.labeled_pool) {
        if (held_out.contains(item.tweet.id)) throw Error(fmt::format("held-out tweet {} leaked into the pool", item.tweet.id));
      }
      std::optional<ClassWeights> weights;
      if (cfg.class_weighting) {
        std::vector<Category> labels;
        for (const auto& item : result.labeled_pool) labels.push_back(item.label);
        weights = compute_class_weights(labels);
      }
      backend.train(result.labeled_pool, weights, iteration);
      trained_on = result.labeled_pool.size();
      test_report = evaluate(backend, test_set, source);
      if (!validate_set.empty()) validate_report = evaluate(backend, validate_set, source);
      cached_scores.clear();
      rec.retrained = true;
      need_train = false;

      const double s = cfg.select_on_validate ? validate_report->macro_f1 : test_report.macro_f1;
      if (s > best_score) {
        best_score = s;
        result.best_iteration = iteration;
        backend.mark_best();
      }
    }
    rec.trained_on = trained_on;
    rec.test_metrics = test_report;
    rec.validate_metrics = validate_report;

    // Score the unlabeled pool (or a seeded subsample of it).
    const bool sample = cfg.unlabeled_cap > 0 && cfg.unlabeled_cap < result.unlabeled_pool.size();
    if (sample || rec.retrained || cached_scores.empty()) {
      std::vector<Tweet> candidates;
      if (sample) {
        std::vector<std::size_t> idx(result.unlabeled_pool.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(seed, fmt::format("selftrain-sample-{}", iteration)));
        rng.shuffle(std::span<std::size_t>(idx));
        idx.resize(cfg.unlabeled_cap);
        std::sort(idx.begin(), idx.end());
        for (auto i : idx) candidates.push_back(result.unlabeled_pool[i]);
      } else {
        candidates = result.unlabeled_pool;
      }
      const auto preds = backend.predict(candidates);
      if (preds.size() != candidates.size()) throw Error("backend returned the wrong number of predictions");
      cached_scores.clear();
      for (std::size_t i = 0; i < candidates.size(); ++i) cached_scores.push_back({candidates[i].id, preds[i]});
    }
    rec.scored = cached_scores.size();

    auto batch = select_pseudo_labels(cached_scores, sched, cfg.quotas, admitted_ids, iteration);
    std::array<double, kNumCategories> conf_sum{};
    std::unordered_map<std::string, const PseudoLabel*> by_id;
    for (const auto& e : batch.entries) {
      ++rec.admitted_per_class[index_of(e.label)];
      conf_sum[index_of(e.label)] += e.confidence;
      by_id.emplace(e.tweet_id, &e);
      admitted_ids.insert(e.tweet_id);
    }
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      if (rec.admitted_per_class[c] > 0) rec.mean_confidence_per_class[c] = conf_sum[c] / rec.admitted_per_class[c];
    }
    if (!batch.empty()) {
      std::vector<Tweet> remaining;
      remaining.reserve(result.unlabeled_pool.size());
      for (auto& t : result.unlabeled_pool) {
        auto it = by_id.find(t.id);
        if (it == by_id.end()) {
          remaining.push_back(std::move(t));
        } else {
          result.labeled_pool.push_back({std::move(t), it->second->label, it->second->confidence, true, iteration});
        }
      }
      result.unlabeled_pool = std::move(remaining);
      std::erase_if(cached_scores, [&](const ScoredItem& s) { return by_id.contains(s.id); });
      need_train = true;
    }
    rec.admitted = batch.entries;
    rec.labeled_pool = result.labeled_pool.size();
    rec.unlabeled_pool = result.unlabeled_pool.size();
    if (rec.labeled_pool + rec.unlabeled_pool != total) throw Error("self-training pools lost or gained tweets");

    spdlog::info("self-train iteration {}: threshold {:.2f}, admitted {}, pool {}/{}, TEST macro F1 {:.4f}", iteration,
                 rec.threshold, rec.admitted_total(), rec.labeled_pool, rec.unlabeled_pool, rec.test_metrics.macro_f1);
    const bool any = !batch.empty();
    if (on_iteration) on_iteration(rec);
    result.history.push_back(std::move(rec));

    const auto step = next_threshold(sched, any);
    if (step.terminate) {
      result.terminated_at_floor = true;
      break;
    }
    sched = step.next;
    // An exhausted pool still gets a final training round on the admissions.
    if (result.unlabeled_pool.empty() && !need_train) break;
  }
  backend.restore_best();
  return result;
}

void write_pool_csv(std::ostream& out, std::span<const PoolItem> pool) {
  csv::write_row(out, {"tweet_id", "label", "confidence", "source", "iteration"});
  for (const auto& p : pool) {
    csv::write_row(out, {p.tweet.id, std::to_string(code_of(p.label)), fmt::format("{:.6f}", p.confidence),
                         p.pseudo ? "pseudo" : "expert", std::to_string(p.iteration)});
  }
}

TransformerSelfTrainBackend::TransformerSelfTrainBackend(ModelConfig cfg, bool incremental, ModelLoader loader)
    : cfg_(std::move(cfg)), incremental_(incremental), loader_(std::move(loader)) {}

TextClassifier& TransformerSelfTrainBackend::model() {
  if (!model_) throw Error("self-training model has not been trained yet");
  return *model_;
}

void TransformerSelfTrainBackend::train(std::span<const PoolItem> pool, const std::optional<ClassWeights>& weights,
                                        std::size_t iteration) {
  const std::uint64_t seed = cfg_.global_seed + iteration;
  const bool fresh = !model_ || !incremental_;
  if (fresh) model_.emplace(loader_(cfg_, derive_seed(seed, "head")));

  SplitManifest parent{"POOL", {}, seed, std::nullopt};
  std::vector<StratItem> items;
  std::unordered_map<std::string, const PoolItem*> by_id;
  for (const auto& p : pool) {
    parent.member_ids.push_back(p.tweet.id);
    items.push_back({p.tweet.id, p.label});
    by_id.emplace(p.tweet.id, &p);
  }
  const std::array<double, 2> fractions{0.8, 0.2};
  const std::array<std::string, 2> names{"POOL_FIT", "POOL_VALIDATE"};
  const auto parts = stratified_split(parent, items, fractions, names, derive_seed(seed, "selftrain-split"));
  auto to_items = [&](const SplitManifest& m) {
    std::vector<TrainItem> out;
    for (const auto& id : m.member_ids) {
      const auto* p = by_id.at(id);
      out.push_back({id, p->tweet.text, p->label});
    }
    return out;
  };
  const auto fit = to_items(parts[0]);
  const auto validate = to_items(parts[1]);
  TrainOptions options;
  options.class_weights = weights;
  options.reinit_head = fresh;
  fine_tune(*model_, fit, validate, cfg_, seed, options);
}

std::vector<Prediction> TransformerSelfTrainBackend::predict(std::span<const Tweet> tweets) {
  return model().predict_batch(tweets, cfg_.threads);
}

void TransformerSelfTrainBackend::mark_best() { best_ = model().network().parameters(); }

void TransformerSelfTrainBackend::restore_best() {
  if (model_ && !best_.empty()) model_->network().parameters() = best_;
}

}  // namespace polyframe
