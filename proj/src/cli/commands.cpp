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

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "polyframe/analytics/analytics.hpp"
#include "polyframe/cli/cli.hpp"
#include "polyframe/common/csv.hpp"
#include "polyframe/common/rng.hpp"
#include "polyframe/corpus/corpus.hpp"
#include "polyframe/metrics/metrics.hpp"
#include "polyframe/models/baseline.hpp"
#include "polyframe/partition/partition.hpp"

namespace polyframe {

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = ".";
  std::string log_level = "info";
};

struct Context {
  AppConfig cfg;
  std::filesystem::path out;
  RunManifest manifest;
  RunLog log;

  std::filesystem::path output(const std::string& name) {
    auto p = out / name;
    manifest.add_output(p);
    return p;
  }
  void input(const std::filesystem::path& p) { manifest.add_input(p); }
};

using Handler = std::function<void(Context&)>;

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "key = value configuration file");
  cmd->add_option("--set", common.overrides, "configuration override key=value (repeatable)");
  cmd->add_option("--out", common.out, "output directory")->capture_default_str();
  cmd->add_option("--log-level", common.log_level, "trace, debug, info, warn or error")->capture_default_str();
}

void check_device() {
  const char* dev = std::getenv(kEnvDevice);
  if (dev != nullptr && std::string_view(dev) != "cpu" && *dev != '\0') {
    spdlog::warn("{}={} requested but only the cpu device is available; using cpu", kEnvDevice, dev);
  }
}

void execute(const std::string& command, const CommonOptions& common, const Handler& handler) {
  spdlog::set_level(spdlog::level::from_str(common.log_level));
  std::optional<std::filesystem::path> cfg_path;
  if (!common.config_path.empty()) cfg_path = common.config_path;
  Context ctx;
  ctx.cfg = load_config(cfg_path, common.overrides);
  if (!ctx.cfg.llm.cache_path.has_parent_path()) {
    if (const char* dir = std::getenv(kEnvCacheDir); dir != nullptr && *dir != '\0') {
      ctx.cfg.llm.cache_path = std::filesystem::path(dir) / ctx.cfg.llm.cache_path;
    }
  }
  check_device();
  ctx.out = common.out;
  std::filesystem::create_directories(ctx.out);
  ctx.log.open(ctx.out / "log.jsonl");
  ctx.manifest.command = command;
  ctx.manifest.config = ctx.cfg.to_json();
  ctx.manifest.config_hash = ctx.cfg.hash();
  ctx.manifest.seed = ctx.cfg.model.global_seed;
  ctx.manifest.started_at = utc_now();
  if (cfg_path) ctx.input(*cfg_path);
  ctx.manifest.write(ctx.out);
  ctx.log.event("start", {{"command", command}, {"config_hash", ctx.manifest.config_hash}});
  try {
    handler(ctx);
  } catch (const std::exception& ex) {
    ctx.manifest.status = "failed";
    ctx.manifest.finished_at = utc_now();
    ctx.manifest.write(ctx.out);
    ctx.log.event("error", {{"message", ex.what()}});
    throw;
  }
  ctx.manifest.status = "ok";
  ctx.manifest.finished_at = utc_now();
  ctx.manifest.write(ctx.out);
  ctx.log.event("finish", {{"outputs", ctx.manifest.outputs}});
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", p.string()));
  return out;
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

Corpus read_corpus(Context& ctx, const std::filesystem::path& path) {
  auto fmt_kind = format_from_path(path);
  if (!fmt_kind) throw DataError(fmt::format("cannot tell the format of {} (expected .csv or .jsonl)", path.string()));
  ctx.input(path);
  auto r = ingest_corpus(path, *fmt_kind);
  if (!r.errors.empty()) spdlog::warn("{}: {} rows rejected", path.string(), r.errors.size());
  return std::move(r.corpus);
}

LabeledSet read_label(Context& ctx, const std::filesystem::path& path) {
  ctx.input(path);
  return read_labeled_csv(path);
}

SplitBundle read_splits(Context& ctx, const std::filesystem::path& path) {
  ctx.input(path);
  return read_split_bundle(path);
}

std::vector<Category> labels_under(std::span<const LabeledExample> set, LabelSource source) {
  std::vector<Category> out;
  out.reserve(set.size());
  for (const auto& e : set) out.push_back(label_of(e, source));
  return out;
}

// tweet_id plus either a "label" column or label_ar/label_mb (read under `source`).
std::map<std::string, Category> read_id_labels(const std::filesystem::path& path, LabelSource source) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  csv::Table table(in);
  table.require({"tweet_id"});
  auto id = *table.column("tweet_id");
  std::optional<std::size_t> single = table.column("label");
  std::optional<std::size_t> ar = table.column("label_ar"), mb = table.column("label_mb");
  if (!single && !(ar && mb)) throw DataError(fmt::format("{}: needs a label column or label_ar and label_mb", path.string()));
  std::map<std::string, Category> out;
  csv::Record rec;
  auto code = [&](std::size_t col) {
    std::optional<Category> c;
    try {
      c = category_from_code(std::stoi(rec.fields.at(col)));
    } catch (const std::exception&) {
    }
    if (!c) throw DataError(fmt::format("{}:{}: label is not 1, 2 or 3", path.string(), rec.line));
    return *c;
  };
  while (table.next(rec)) {
    if (rec.fields.size() < table.header().size()) {
      throw DataError(fmt::format("{}:{}: expected {} fields", path.string(), rec.line, table.header().size()));
    }
    Category c;
    if (single) {
      c = code(*single);
    } else {
      Category a = code(*ar), b = code(*mb);
      if (source == LabelSource::Mb) {
        c = b;
      } else if (source == LabelSource::AgreeOnly && a != b) {
        continue;
      } else {
        c = a;
      }
    }
    if (!out.emplace(rec.fields[id], c).second) {
      throw DataError(fmt::format("{}:{}: duplicate tweet_id {}", path.string(), rec.line, rec.fields[id]));
    }
  }
  return out;
}

void write_predictions_csv(const std::filesystem::path& p, const std::vector<std::pair<std::string, Category>>& rows) {
  auto out = open_out(p);
  csv::write_row(out, {"tweet_id", "label"});
  for (const auto& [id, c] : rows) csv::write_row(out, {id, std::to_string(code_of(c))});
}

void write_metrics(Context& ctx, const std::string& stem, const MetricsReport& r) {
  write_json(ctx.output(stem + ".json"), to_json(r));
  auto out = open_out(ctx.output(stem + "_confusion.csv"));
  write_confusion_csv(out, r.confusion);
}

// Records of the labeled file dropped for invalid codes: tweet_id, year.
std::vector<YearItem> read_removed(Context& ctx, const std::filesystem::path& path) {
  ctx.input(path);
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  csv::Table table(in);
  table.require({"tweet_id", "year"});
  auto id = *table.column("tweet_id");
  auto year = *table.column("year");
  std::vector<YearItem> out;
  csv::Record rec;
  while (table.next(rec)) {
    if (rec.fields.size() < table.header().size()) continue;
    int y = 0;
    try {
      y = std::stoi(rec.fields[year]);
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: year is not an integer", path.string(), rec.line));
    }
    out.push_back({rec.fields[id], y});
  }
  return out;
}

// Corpus tweets that are not in the labeled file (nor among `extra_excluded`).
std::vector<Tweet> unlabeled_pool(const Corpus& corpus, std::span<const LabeledExample> label_set,
                                  std::span<const YearItem> extra_excluded) {
  std::unordered_set<std::string> taken;
  for (const auto& e : label_set) taken.insert(e.tweet.id);
  for (const auto& x : extra_excluded) taken.insert(x.id);
  std::vector<Tweet> out;
  for (const auto& t : corpus.tweets()) {
    if (!taken.contains(t.id)) out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------

void cmd_ingest(Context& ctx, const std::string& input) {
  auto kind = format_from_path(input);
  if (!kind) throw DataError(fmt::format("cannot tell the format of {} (expected .csv or .jsonl)", input));
  ctx.input(input);
  auto r = ingest_corpus(std::filesystem::path(input), *kind);
  {
    auto out = open_out(ctx.output("corpus.csv"));
    write_corpus_csv(out, r.corpus.tweets());
  }
  auto err = open_out(ctx.output("ingest_errors.csv"));
  csv::write_row(err, {"line", "message"});
  for (const auto& e : r.errors) csv::write_row(err, {std::to_string(e.line), e.message});
  ctx.log.event("ingest", {{"rows_read", r.rows_read}, {"kept", r.corpus.size()}, {"rejected", r.errors.size()}});
  spdlog::info("ingested {} of {} rows", r.corpus.size(), r.rows_read);
}

struct RestoreArgs {
  std::string corpus, labeled, decisions;
  double threshold = 0.80;
  bool same_year = false;
  bool accept_top = false;
};

void cmd_restore(Context& ctx, const RestoreArgs& a) {
  Corpus corpus = read_corpus(ctx, a.corpus);
  ctx.input(a.labeled);
  auto raw = read_raw_labeled(std::filesystem::path(a.labeled));
  RestoreOptions opt;
  opt.threshold = a.threshold;
  opt.same_year_only = a.same_year;
  opt.threads = ctx.cfg.model.threads;
  auto r = restore_ids(raw, corpus, opt);

  std::vector<MatchedRecord> matched = r.matched;
  std::vector<ReviewItem> pending = r.review_queue;
  if (!a.decisions.empty()) {
    ctx.input(a.decisions);
    std::ifstream in(a.decisions);
    if (!in) throw DataError(fmt::format("cannot open {}", a.decisions));
    auto entries = read_review_manifest(in);
    auto outcome = apply_review(r.review_queue, raw, corpus, entries);
    matched.insert(matched.end(), outcome.accepted.begin(), outcome.accepted.end());
    pending = outcome.pending;
  } else if (a.accept_top) {
    auto outcome = accept_all_review(r.review_queue, raw, corpus);
    matched.insert(matched.end(), outcome.accepted.begin(), outcome.accepted.end());
    pending = outcome.pending;
  }
  std::sort(matched.begin(), matched.end(),
            [](const MatchedRecord& x, const MatchedRecord& y) { return x.record_index < y.record_index; });

  {
    auto out = open_out(ctx.output("review_manifest.jsonl"));
    write_review_manifest(out, pending);
  }
  {
    auto out = open_out(ctx.output("candidates.csv"));
    write_matched_csv(out, matched);
  }
  auto validated = validate_labels(matched);
  {
    auto out = open_out(ctx.output("label.csv"));
    write_labeled_csv(out, validated.labeled);
  }
  {
    std::map<std::size_t, int> year_of;
    for (const auto& m : matched) year_of[m.record_index] = m.tweet.posted_at.year;
    auto out = open_out(ctx.output("removed.csv"));
    csv::write_row(out, {"record_index", "tweet_id", "year", "reason"});
    for (const auto& rm : validated.removed) {
      csv::write_row(out, {std::to_string(rm.record_index), rm.tweet_id, std::to_string(year_of[rm.record_index]),
                           rm.reason});
    }
  }
  {
    auto out = open_out(ctx.output("discarded.csv"));
    csv::write_row(out, {"record_index", "best_tweet_id", "best_score"});
    for (const auto& d : r.discarded) {
      csv::write_row(out, {std::to_string(d.record_index), d.best ? d.best->tweet_id : "",
                           d.best ? fmt::format("{:.6f}", d.best->score) : ""});
    }
  }
  ctx.log.event("restore", {{"records", raw.size()},
                            {"matched", matched.size()},
                            {"review_pending", pending.size()},
                            {"discarded", r.discarded.size()},
                            {"removed_invalid", validated.removed.size()},
                            {"labeled", validated.labeled.size()}});
  spdlog::info("restored {} records ({} labeled, {} pending review, {} discarded)", matched.size(),
               validated.labeled.size(), pending.size(), r.discarded.size());
}

struct SplitArgs {
  std::string label, removed;
  std::size_t test_per_year = 50;
  int first_year = 2012;
  int last_year = 2021;
};

void cmd_split(Context& ctx, const SplitArgs& a) {
  auto label_set = read_label(ctx, a.label);
  std::vector<YearItem> removed;
  if (!a.removed.empty()) removed = read_removed(ctx, a.removed);
  SplitTreeOptions o;
  o.global_seed = ctx.cfg.model.global_seed;
  o.test_per_year = a.test_per_year;
  o.test_first_year = a.first_year;
  o.test_last_year = a.last_year;
  o.label_source = ctx.cfg.model.label_source;
  o.kfold.k = ctx.cfg.model.cross_val_folds;
  auto bundle = build_split_tree(label_set, o, removed);
  {
    auto out = open_out(ctx.output("splits.json"));
    write_split_bundle(out, bundle);
  }
  nlohmann::json sizes = nlohmann::json::object();
  for (const auto& s : bundle.splits) sizes[s.name] = s.size();
  ctx.log.event("split", {{"sizes", sizes}});
  spdlog::info("TEST={} TRAIN={}", bundle.at("TEST").size(), bundle.at("TRAIN").size());
}

void run_experiment_cmd(Context& ctx, ExperimentMode mode, const std::string& label_path,
                        const std::string& splits_path) {
  auto label_set = read_label(ctx, label_path);
  auto splits = read_splits(ctx, splits_path);
  TransformerTrialRunner runner(load_configured_model, [&](std::size_t trial, const EpochRecord& r) {
    auto j = to_json(r);
    j["trial"] = trial;
    ctx.log.event("epoch", j);
  });
  auto trials_path = ctx.output("trials.jsonl");
  auto trials_out = open_out(trials_path);
  auto report = run_experiment(mode, ctx.cfg.model, splits, label_set, runner, [&](const TrialResult& t) {
    trials_out << to_json(t).dump() << '\n';
    trials_out.flush();
    ctx.log.event("trial", {{"trial", t.trial_index},
                            {"fold", t.fold ? nlohmann::json(*t.fold) : nlohmann::json(nullptr)},
                            {"test_macro_f1", t.test_report.macro_f1},
                            {"test_accuracy", t.test_report.accuracy}});
  });
  write_json(ctx.output("report.json"), to_json(report));
  for (const auto& [coder, agg] : report.aggregate) {
    spdlog::info("{}: accuracy {:.4f} ± {:.4f}, macro F1 {:.4f} ± {:.4f}", coder, agg.accuracy.mean,
                 agg.accuracy.stddev, agg.macro_f1.mean, agg.macro_f1.stddev);
  }
}

void cmd_train_baseline(Context& ctx, BaselineKind kind, const std::string& label_path, const std::string& splits_path) {
  auto label_set = read_label(ctx, label_path);
  auto splits = read_splits(ctx, splits_path);
  const auto source = ctx.cfg.model.label_source;
  const bool agree = source == LabelSource::AgreeOnly;
  auto to_examples = [&](const std::string& name) {
    auto set = select(label_set, splits.at(name));
    std::vector<BaselineExample> out;
    for (const auto& e : set) {
      if (agree && e.label_ar != e.label_mb) continue;
      out.push_back({e.tweet, label_of(e, source)});
    }
    return out;
  };
  auto fit = to_examples(agree ? "FIT_AGREE" : "FIT");
  auto validate = to_examples(agree ? "VALIDATE_AGREE" : "VALIDATE");
  auto test = to_examples("TEST");
  auto result = train_baseline(kind, fit, validate);
  auto report = evaluate_baseline(*result.model, test);
  write_metrics(ctx, "test_metrics", report);
  write_json(ctx.output("baseline.json"), {{"model", kind == BaselineKind::LogReg ? "logreg" : "gbtree"},
                                           {"chosen", result.chosen},
                                           {"validation", to_json(result.validation)},
                                           {"test", to_json(report)}});
  ctx.log.event("baseline", {{"chosen", result.chosen}, {"test_macro_f1", report.macro_f1}});
  spdlog::info("{}: test accuracy {:.4f}, macro F1 {:.4f}", result.chosen, report.accuracy, report.macro_f1);
}

struct SelfTrainArgs {
  std::string label, splits, corpus, removed;
};

void cmd_self_train(Context& ctx, const SelfTrainArgs& a) {
  auto label_set = read_label(ctx, a.label);
  auto splits = read_splits(ctx, a.splits);
  Corpus corpus = read_corpus(ctx, a.corpus);
  std::vector<YearItem> removed;
  if (!a.removed.empty()) removed = read_removed(ctx, a.removed);
  auto pool = unlabeled_pool(corpus, label_set, removed);

  const auto& st = ctx.cfg.selftrain;
  auto train = select(label_set, splits.at(st.select_on_validate ? "FIT" : "TRAIN"));
  auto test = select(label_set, splits.at("TEST"));
  LabeledSet validate;
  if (st.select_on_validate) validate = select(label_set, splits.at("VALIDATE"));

  TransformerSelfTrainBackend backend(ctx.cfg.model, st.incremental);
  auto iterations = open_out(ctx.output("iterations.jsonl"));
  auto result = run_self_training(train, pool, test, validate, ctx.cfg.model.label_source, st,
                                  ctx.cfg.model.global_seed, backend, [&](const IterationRecord& r) {
                                    auto j = to_json(r);
                                    iterations << j.dump() << '\n';
                                    iterations.flush();
                                    ctx.log.event("iteration", {{"iteration", r.iteration},
                                                                {"threshold", r.threshold},
                                                                {"admitted", r.admitted_total()},
                                                                {"test_macro_f1", r.test_metrics.macro_f1}});
                                  });
  {
    auto out = open_out(ctx.output("pool.csv"));
    write_pool_csv(out, result.labeled_pool);
  }
  backend.model().save(ctx.output("model"));
  const auto& best = result.history.at(result.best_iteration - 1);
  write_json(ctx.output("report.json"), {{"best_iteration", result.best_iteration},
                                         {"terminated_at_floor", result.terminated_at_floor},
                                         {"labeled_pool", result.labeled_pool.size()},
                                         {"unlabeled_remaining", result.unlabeled_pool.size()},
                                         {"best_test", to_json(best.test_metrics)}});
  spdlog::info("best iteration {}: test accuracy {:.4f}, macro F1 {:.4f}", result.best_iteration,
               best.test_metrics.accuracy, best.test_metrics.macro_f1);
}

struct LlmArgs {
  std::string label, splits, split = "TEST", corpus, mode = "direct";
  bool explanation = false;
  double k = 5.0;
  std::size_t limit = 0;
};

void cmd_llm_classify(Context& ctx, const LlmArgs& a) {
  PromptSpec spec;
  if (a.mode == "direct") {
    spec.mode = PromptMode::Direct;
  } else if (a.mode == "confidence") {
    spec.mode = PromptMode::Confidence;
  } else {
    throw ConfigError(fmt::format("--mode must be direct or confidence (got '{}')", a.mode));
  }
  spec.with_explanation = a.explanation;

  std::vector<Tweet> tweets;
  std::map<std::string, Category> gold;
  if (!a.corpus.empty()) {
    Corpus corpus = read_corpus(ctx, a.corpus);
    tweets = corpus.tweets();
  } else {
    if (a.label.empty() || a.splits.empty()) throw ConfigError("llm-classify needs --corpus or --label with --splits");
    auto label_set = read_label(ctx, a.label);
    auto splits = read_splits(ctx, a.splits);
    for (const auto& e : select(label_set, splits.at(a.split))) {
      if (ctx.cfg.model.label_source == LabelSource::AgreeOnly && e.label_ar != e.label_mb) continue;
      tweets.push_back(e.tweet);
      gold[e.tweet.id] = label_of(e, ctx.cfg.model.label_source);
    }
  }
  if (a.limit > 0 && tweets.size() > a.limit) tweets.resize(a.limit);

  const auto& ep = ctx.cfg.llm;
  HttpChatTransport transport(ep.base_url, api_key_from_env(ep), ep.timeout_seconds, ep.temperature);
  ResponseCache cache(ep.cache_path);
  auto options = remote_options(ep);
  ctx.log.event("llm_start", {{"prompt", spec.name()}, {"tweets", tweets.size()}, {"endpoint", ep.to_json()}});
  auto results = classify_remote(tweets, spec, transport, cache, options);

  {
    auto out = open_out(ctx.output("results.csv"));
    write_llm_results_csv(out, results, spec);
  }
  {
    auto out = open_out(ctx.output("unclassified.csv"));
    write_unclassified_csv(out, results);
  }
  std::vector<std::pair<std::string, Category>> preds;
  std::size_t cached = 0, rescaled = 0;
  for (const auto& r : results) {
    if (!r.response) continue;
    cached += r.from_cache ? 1 : 0;
    Category c;
    if (const auto* d = std::get_if<DirectAnswer>(&r.response->parsed)) {
      c = d->label;
    } else {
      const auto& conf = std::get<ConfidenceAnswer>(r.response->parsed);
      rescaled += conf.rescaled ? 1 : 0;
      c = decide_k_threshold(conf, a.k);
    }
    preds.emplace_back(r.tweet_id, c);
  }
  write_predictions_csv(ctx.output("predictions.csv"), preds);
  nlohmann::json summary{{"prompt", spec.name()},
                         {"tweets", tweets.size()},
                         {"classified", preds.size()},
                         {"unclassified", tweets.size() - preds.size()},
                         {"from_cache", cached},
                         {"rescaled", rescaled}};
  if (spec.mode == PromptMode::Confidence) summary["k"] = a.k;
  if (!gold.empty() && !preds.empty()) {
    std::vector<Category> p, g;
    for (const auto& [id, c] : preds) {
      p.push_back(c);
      g.push_back(gold.at(id));
    }
    auto report = classification_report(p, g);
    write_metrics(ctx, "metrics", report);
    summary["accuracy"] = report.accuracy;
    summary["macro_f1"] = report.macro_f1;
    summary["weighted_f1"] = report.weighted_f1;
    spdlog::info("{}: accuracy {:.4f}, macro F1 {:.4f}, weighted F1 {:.4f} on {} tweets", spec.name(), report.accuracy,
                 report.macro_f1, report.weighted_f1, p.size());
  }
  write_json(ctx.output("summary.json"), summary);
  ctx.log.event("llm_done", summary);
}

struct GridArgs {
  std::string results, label, splits, split;
  double k_min = 1, k_max = 100, step = 1;
};

void cmd_llm_grid(Context& ctx, const GridArgs& a) {
  ctx.input(a.results);
  std::ifstream in(a.results);
  if (!in) throw DataError(fmt::format("cannot open {}", a.results));
  auto confs = read_confidence_results_csv(in);
  auto label_set = read_label(ctx, a.label);
  std::optional<std::unordered_set<std::string>> keep;
  if (!a.split.empty()) {
    if (a.splits.empty()) throw ConfigError("--split needs --splits");
    auto splits = read_splits(ctx, a.splits);
    const auto& m = splits.at(a.split);
    keep.emplace(m.member_ids.begin(), m.member_ids.end());
  }
  std::vector<ScoredConfidence> scored;
  std::size_t missing = 0;
  for (const auto& e : label_set) {
    if (keep && !keep->contains(e.tweet.id)) continue;
    if (ctx.cfg.model.label_source == LabelSource::AgreeOnly && e.label_ar != e.label_mb) continue;
    auto it = confs.find(e.tweet.id);
    if (it == confs.end()) {
      ++missing;
      continue;
    }
    scored.push_back({it->second, label_of(e, ctx.cfg.model.label_source)});
  }
  if (missing > 0) spdlog::warn("{} labeled tweets have no confidence result and are skipped", missing);
  auto grid = grid_search_k(scored, a.k_min, a.k_max, a.step);
  {
    auto out = open_out(ctx.output("k_curve.csv"));
    write_k_curve_csv(out, grid);
  }
  auto at = [&](double k) {
    for (const auto& p : grid.curve) {
      if (p.k == k) return nlohmann::json{{"k", p.k}, {"accuracy", p.accuracy}, {"macro_f1", p.macro_f1},
                                          {"weighted_f1", p.weighted_f1}};
    }
    return nlohmann::json(nullptr);
  };
  nlohmann::json j{{"scored", scored.size()},
                   {"skipped", missing},
                   {"best_accuracy", at(grid.best_k_accuracy)},
                   {"best_macro_f1", at(grid.best_k_macro_f1)},
                   {"best_weighted_f1", at(grid.best_k_weighted_f1)}};
  write_json(ctx.output("grid.json"), j);
  ctx.log.event("llm_grid", j);
  spdlog::info("best k: accuracy {} / macro F1 {}", grid.best_k_accuracy, grid.best_k_macro_f1);
}

void cmd_evaluate(Context& ctx, const std::string& pred_path, const std::string& gold_path) {
  ctx.input(pred_path);
  ctx.input(gold_path);
  auto pred = read_id_labels(pred_path, ctx.cfg.model.label_source);
  auto gold = read_id_labels(gold_path, ctx.cfg.model.label_source);
  std::vector<Category> p, g;
  std::size_t unmatched = 0;
  for (const auto& [id, c] : pred) {
    auto it = gold.find(id);
    if (it == gold.end()) {
      ++unmatched;
      continue;
    }
    p.push_back(c);
    g.push_back(it->second);
  }
  if (p.empty()) throw DataError("no tweet_id is shared by the prediction and gold files");
  if (unmatched > 0) spdlog::warn("{} predicted tweets have no gold label and are ignored", unmatched);
  auto report = classification_report(p, g);
  write_metrics(ctx, "metrics", report);
  ctx.log.event("evaluate", {{"n", report.n}, {"accuracy", report.accuracy}, {"macro_f1", report.macro_f1}});
  spdlog::info("accuracy {:.4f}, macro F1 {:.4f}, weighted F1 {:.4f} on {} tweets", report.accuracy,
               report.macro_f1, report.weighted_f1, report.n);
}

struct LabelAllArgs {
  std::string label, splits, corpus, removed, checkpoint;
};

void cmd_label_all(Context& ctx, const LabelAllArgs& a) {
  auto label_set = read_label(ctx, a.label);
  Corpus corpus = read_corpus(ctx, a.corpus);
  std::vector<YearItem> removed;
  if (!a.removed.empty()) removed = read_removed(ctx, a.removed);
  const auto& cfg = ctx.cfg.model;

  std::optional<TextClassifier> model;
  if (!a.checkpoint.empty()) {
    model.emplace(TextClassifier::load(a.checkpoint, cfg.max_seq_len, derive_seed(cfg.global_seed, "head")));
  } else {
    if (a.splits.empty()) throw ConfigError("label-all needs --splits unless --checkpoint is given");
    auto splits = read_splits(ctx, a.splits);
    const bool agree = cfg.label_source == LabelSource::AgreeOnly;
    auto fit = to_train_items(select(label_set, splits.at(agree ? "FIT_AGREE" : "FIT")), cfg.label_source);
    auto validate =
        to_train_items(select(label_set, splits.at(agree ? "VALIDATE_AGREE" : "VALIDATE")), cfg.label_source);
    model.emplace(load_configured_model(cfg, derive_seed(cfg.global_seed, "head")));
    TrainOptions options;
    options.on_epoch = [&](const EpochRecord& r) { ctx.log.event("epoch", to_json(r)); };
    fine_tune(*model, fit, validate, cfg, cfg.global_seed, options);
    model->save(ctx.output("model"));
  }

  auto pool = unlabeled_pool(corpus, label_set, removed);
  auto preds = model->predict_batch(pool, cfg.threads);
  auto out = open_out(ctx.output("labeled_corpus.csv"));
  csv::write_row(out, {"tweet_id", "text", "author_id", "created_at", "label", "confidence", "source"});
  for (const auto& e : label_set) {
    if (cfg.label_source == LabelSource::AgreeOnly && e.label_ar != e.label_mb) continue;
    csv::write_row(out, {e.tweet.id, e.tweet.text, e.tweet.author_id, format_date(e.tweet.posted_at),
                         std::to_string(code_of(label_of(e, cfg.label_source))), "1", "expert"});
  }
  std::array<std::size_t, kNumCategories> counts{};
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& t = pool[i];
    ++counts[index_of(preds[i].label)];
    csv::write_row(out, {t.id, t.text, t.author_id, format_date(t.posted_at), std::to_string(code_of(preds[i].label)),
                         fmt::format("{:.6f}", preds[i].top_confidence()), "model"});
  }
  ctx.log.event("label_all", {{"expert", label_set.size()}, {"model", pool.size()}, {"model_counts", counts}});
  spdlog::info("labeled {} corpus tweets with the model", pool.size());
}

struct StatsArgs {
  std::string label, splits, labeled_corpus, metadata;
  bool span_from_data = false;
};

void cmd_stats(Context& ctx, const StatsArgs& a) {
  nlohmann::json j = nlohmann::json::object();
  if (!a.label.empty()) {
    auto label_set = read_label(ctx, a.label);
    auto ar = labels_under(label_set, LabelSource::Ar);
    auto mb = labels_under(label_set, LabelSource::Mb);
    j["agreement"] = to_json(agreement_report(ar, mb, KappaWeights::Linear));
    j["agreement_quadratic"] = to_json(agreement_report(ar, mb, KappaWeights::Quadratic));
    if (!a.splits.empty()) {
      auto splits = read_splits(ctx, a.splits);
      nlohmann::json dist = nlohmann::json::object();
      for (const auto& m : splits.splits) {
        std::array<std::size_t, kNumCategories> counts{};
        for (const auto& e : select(label_set, m)) ++counts[index_of(label_of(e, ctx.cfg.model.label_source))];
        dist[m.name] = {{"size", m.size()}, {"class_counts", counts}};
      }
      j["splits"] = dist;
    }
  }
  if (!a.labeled_corpus.empty()) {
    if (a.metadata.empty()) throw ConfigError("--labeled-corpus needs --metadata");
    ctx.input(a.labeled_corpus);
    ctx.input(a.metadata);
    auto tweets = read_labeled_tweets(std::filesystem::path(a.labeled_corpus));
    auto meta = load_metadata(std::filesystem::path(a.metadata));
    std::optional<MonthSpan> span;
    if (!a.span_from_data) span = MonthSpan{};
    nlohmann::json agg_json = nlohmann::json::object();
    for (auto g : {GroupBy::Party, GroupBy::Gender, GroupBy::Race, GroupBy::None}) {
      auto agg = aggregate_monthly(tweets, meta, g, span);
      for (const auto& p : emit_figures(agg, ctx.out / "figures")) ctx.manifest.add_output(p);
      agg_json[std::string(to_string(g))] = {{"groups", agg.groups},
                                              {"months", agg.span.months()},
                                              {"counted", agg.counted},
                                              {"excluded", agg.excluded.size()},
                                              {"unknown_authors", agg.unknown_authors}};
    }
    j["aggregates"] = agg_json;
  }
  if (j.empty()) throw ConfigError("stats needs --label and/or --labeled-corpus with --metadata");
  write_json(ctx.output("stats.json"), j);
  ctx.log.event("stats");
}

struct InitEncoderArgs {
  std::string corpus;
  std::size_t hidden = 64, layers = 2, heads = 4, intermediate = 128, max_positions = 130, vocab_limit = 8000;
};

void cmd_init_encoder(Context& ctx, const InitEncoderArgs& a) {
  Corpus corpus = read_corpus(ctx, a.corpus);
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& t : corpus.tweets()) texts.push_back(t.text);
  RandomEncoderOptions o;
  o.encoder.hidden_size = a.hidden;
  o.encoder.num_layers = a.layers;
  o.encoder.num_heads = a.heads;
  o.encoder.intermediate_size = a.intermediate;
  o.encoder.max_positions = a.max_positions;
  o.vocab_limit = a.vocab_limit;
  o.seed = ctx.cfg.model.global_seed;
  write_random_checkpoint(ctx.output("checkpoint"), texts, o);
  spdlog::info("wrote a random encoder checkpoint to {}", (ctx.out / "checkpoint").string());
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Framing classification pipeline: data preparation, training, self-training, LLM labeling and analytics"};
  app.require_subcommand(1);
  CommonOptions common;
  std::string command;
  Handler handler;

  auto sub = [&](const char* name, const char* help) {
    auto* c = app.add_subcommand(name, help);
    add_common(c, common);
    c->callback([&command, name] { command = name; });
    return c;
  };

  std::string ingest_input;
  auto* ingest = sub("ingest", "validate a corpus file and write corpus.csv");
  ingest->add_option("--input", ingest_input, "corpus file (.csv or .jsonl)")->required();

  RestoreArgs restore;
  auto* rest = sub("restore-ids", "match labeled records to corpus tweets and validate labels");
  rest->add_option("--corpus", restore.corpus)->required();
  rest->add_option("--labeled", restore.labeled, "text, label_ar, label_mb, year")->required();
  rest->add_option("--threshold", restore.threshold)->capture_default_str();
  rest->add_flag("--same-year", restore.same_year, "only match tweets from the record's year");
  rest->add_option("--decisions", restore.decisions, "review manifest with accept/reject decisions");
  rest->add_flag("--accept-top", restore.accept_top, "accept the unique top candidate of every review item");

  SplitArgs split;
  std::optional<std::uint64_t> split_seed;
  auto* sp = sub("split", "build every partition of the labeled data");
  sp->add_option("--label", split.label)->required();
  sp->add_option("--removed", split.removed, "removed.csv from restore-ids");
  sp->add_option("--seed", split_seed, "global seed (overrides the configuration)");
  sp->add_option("--test-per-year", split.test_per_year)->capture_default_str();
  sp->add_option("--first-year", split.first_year)->capture_default_str();
  sp->add_option("--last-year", split.last_year)->capture_default_str();

  std::string tr_label, tr_splits, tr_model = "transformer";
  auto* tr = sub("train", "holdout trials on FIT/VALIDATE/TEST");
  tr->add_option("--label", tr_label)->required();
  tr->add_option("--splits", tr_splits)->required();
  tr->add_option("--model", tr_model, "transformer, logreg or gbtree")->capture_default_str();

  std::string cv_label, cv_splits;
  auto* cv = sub("cross-validate", "cross-validation trials over the k folds");
  cv->add_option("--label", cv_label)->required();
  cv->add_option("--splits", cv_splits)->required();

  SelfTrainArgs st;
  auto* stc = sub("self-train", "iterative pseudo-labeling");
  stc->add_option("--label", st.label)->required();
  stc->add_option("--splits", st.splits)->required();
  stc->add_option("--corpus", st.corpus, "full corpus; tweets outside LABEL form the unlabeled pool")->required();
  stc->add_option("--removed", st.removed, "removed.csv from restore-ids");

  LlmArgs llm;
  auto* lc = sub("llm-classify", "label tweets with a remote LLM");
  lc->add_option("--label", llm.label);
  lc->add_option("--splits", llm.splits);
  lc->add_option("--split", llm.split)->capture_default_str();
  lc->add_option("--corpus", llm.corpus, "classify an unlabeled corpus instead of a split");
  lc->add_option("--mode", llm.mode, "direct or confidence")->capture_default_str();
  lc->add_flag("--explanation", llm.explanation, "use the prompt variant asking for an explanation");
  lc->add_option("--k", llm.k, "class 3 threshold for the confidence mode")->capture_default_str();
  lc->add_option("--limit", llm.limit, "classify at most this many tweets (0 = all)");

  GridArgs grid;
  auto* lg = sub("llm-grid", "grid search of k over confidence results");
  lg->add_option("--results", grid.results, "results.csv from llm-classify --mode confidence")->required();
  lg->add_option("--label", grid.label)->required();
  lg->add_option("--splits", grid.splits);
  lg->add_option("--split", grid.split, "restrict to one split");
  lg->add_option("--k-min", grid.k_min)->capture_default_str();
  lg->add_option("--k-max", grid.k_max)->capture_default_str();
  lg->add_option("--k-step", grid.step)->capture_default_str();

  std::string ev_pred, ev_gold;
  auto* ev = sub("evaluate", "score predictions against gold labels");
  ev->add_option("--pred", ev_pred, "tweet_id, label")->required();
  ev->add_option("--gold", ev_gold, "tweet_id with label or label_ar/label_mb")->required();

  LabelAllArgs la;
  auto* lac = sub("label-all", "train (or load) a model and label every unlabeled corpus tweet");
  lac->add_option("--label", la.label)->required();
  lac->add_option("--splits", la.splits);
  lac->add_option("--corpus", la.corpus)->required();
  lac->add_option("--removed", la.removed, "removed.csv from restore-ids");
  lac->add_option("--checkpoint", la.checkpoint, "trained checkpoint to use instead of training");

  StatsArgs stats;
  auto* stc2 = sub("stats", "agreement, split distributions and monthly aggregates");
  stc2->add_option("--label", stats.label);
  stc2->add_option("--splits", stats.splits);
  stc2->add_option("--labeled-corpus", stats.labeled_corpus, "labeled_corpus.csv from label-all");
  stc2->add_option("--metadata", stats.metadata, "author_id, party, gender, race, state");
  stc2->add_flag("--span-from-data", stats.span_from_data, "use the data's month range instead of 2008-01..2023-02");

  InitEncoderArgs ie;
  auto* iec = sub("init-encoder", "write a small randomly initialised encoder checkpoint");
  iec->add_option("--corpus", ie.corpus, "texts for the vocabulary")->required();
  iec->add_option("--hidden", ie.hidden)->capture_default_str();
  iec->add_option("--layers", ie.layers)->capture_default_str();
  iec->add_option("--heads", ie.heads)->capture_default_str();
  iec->add_option("--intermediate", ie.intermediate)->capture_default_str();
  iec->add_option("--max-positions", ie.max_positions)->capture_default_str();
  iec->add_option("--vocab-limit", ie.vocab_limit)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
      std::cerr << "error: unknown command '" << argv[1] << "'\n\n" << app.help();
      return 2;
    }
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  if (command == "split" && split_seed) common.overrides.push_back(fmt::format("global_seed={}", *split_seed));

  const std::map<std::string, Handler> handlers{
      {"ingest", [&](Context& c) { cmd_ingest(c, ingest_input); }},
      {"restore-ids", [&](Context& c) { cmd_restore(c, restore); }},
      {"split", [&](Context& c) { cmd_split(c, split); }},
      {"train",
       [&](Context& c) {
         if (tr_model == "transformer") {
           run_experiment_cmd(c, ExperimentMode::Holdout, tr_label, tr_splits);
         } else if (tr_model == "logreg") {
           cmd_train_baseline(c, BaselineKind::LogReg, tr_label, tr_splits);
         } else if (tr_model == "gbtree") {
           cmd_train_baseline(c, BaselineKind::GbTree, tr_label, tr_splits);
         } else {
           throw ConfigError(fmt::format("--model must be transformer, logreg or gbtree (got '{}')", tr_model));
         }
       }},
      {"cross-validate", [&](Context& c) { run_experiment_cmd(c, ExperimentMode::CrossValidation, cv_label, cv_splits); }},
      {"self-train", [&](Context& c) { cmd_self_train(c, st); }},
      {"llm-classify", [&](Context& c) { cmd_llm_classify(c, llm); }},
      {"llm-grid", [&](Context& c) { cmd_llm_grid(c, grid); }},
      {"evaluate", [&](Context& c) { cmd_evaluate(c, ev_pred, ev_gold); }},
      {"label-all", [&](Context& c) { cmd_label_all(c, la); }},
      {"stats", [&](Context& c) { cmd_stats(c, stats); }},
      {"init-encoder", [&](Context& c) { cmd_init_encoder(c, ie); }},
  };

  try {
    execute(command, common, handlers.at(command));
  } catch (const ConfigError& ex) {
    spdlog::error("configuration error: {}", ex.what());
    return 1;
  } catch (const std::exception& ex) {
    spdlog::error("{}", ex.what());
    return 1;
  }
  return 0;
}

}  // namespace polyframe
