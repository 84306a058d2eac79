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

#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <unordered_map>

#include "polyframe/common/config.hpp"
#include "polyframe/common/csv.hpp"
#include "polyframe/common/hash.hpp"
#include "polyframe/common/rng.hpp"
#include "polyframe/common/text.hpp"
#include "polyframe/corpus/corpus.hpp"
#include "polyframe/partition/partition.hpp"
#include "support.hpp"

using namespace polyframe;
using namespace polyframe::testing;

// ---------------------------------------------------------------------------
// common

TEST(Common, RngIsSeedDeterministic) {
  Rng a(9), b(9), c(10);
  for (int i = 0; i < 10; ++i) {
    auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
  EXPECT_NE(derive_seed(1, "TEST"), derive_seed(1, "DEV"));
  EXPECT_EQ(derive_seed(1, "TEST"), derive_seed(1, "TEST"));
}

TEST(Common, UniformIndexCoversRange) {
  Rng r(1);
  std::array<int, 5> hits{};
  for (int i = 0; i < 5000; ++i) ++hits[r.uniform_index(5)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Common, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Common, CsvQuotedFieldsRoundTrip) {
  std::ostringstream out;
  csv::write_row(out, {"a", "b,c", "say \"hi\"", "multi\nline"});
  std::istringstream in(out.str());
  csv::Reader r(in);
  csv::Record rec;
  ASSERT_TRUE(r.next(rec));
  EXPECT_EQ(rec.fields, (std::vector<std::string>{"a", "b,c", "say \"hi\"", "multi\nline"}));
  EXPECT_FALSE(r.next(rec));
}

TEST(Common, CsvTableRequiresColumns) {
  std::istringstream in("x,y\n1,2\n");
  csv::Table t(in);
  EXPECT_EQ(t.column("y"), 1u);
  EXPECT_FALSE(t.column("z").has_value());
  EXPECT_THROW(t.require({"x", "z"}), DataError);
}

TEST(Common, ConfigParsing) {
  std::istringstream in("# comment\nbatch_size = 32\n\nlearning_rate=1e-4\n");
  auto e = config::parse(in, "cfg");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].key, "batch_size");
  EXPECT_EQ(e[0].value, "32");
  EXPECT_EQ(e[0].origin, "cfg:2");
  std::istringstream bad("no equals sign\n");
  EXPECT_THROW(config::parse(bad, "cfg"), ConfigError);
  EXPECT_THROW(config::parse_override("novalue"), ConfigError);
  EXPECT_THROW(config::to_positive({"batch_size", "0", "x"}), ConfigError);
  EXPECT_THROW(config::to_bool({"flag", "maybe", "x"}), ConfigError);
  EXPECT_TRUE(config::to_bool({"flag", "true", "x"}));
}

TEST(Common, NormalizeForMatchFoldsCaseAndWhitespace) {
  EXPECT_EQ(text::normalize_for_match("  Hello   WORLD \n"), U"hello world");
}

// ---------------------------------------------------------------------------
// corpus

TEST(Corpus, IngestCsvRecordsRowErrors) {
  std::istringstream in(
      "tweet_id,text,author_id,created_at\n"
      "1,hello,a,2020-01-05\n"
      "2,,a,2020-01-05\n"
      "3,text,a,not-a-date\n"
      "1,dup,a,2020-01-05\n"
      "4,old,a,2007-12-31\n"
      "5,ok,b,2023-02-28T10:00:00Z\n");
  auto r = ingest_corpus(in, CorpusFormat::Csv);
  EXPECT_EQ(r.rows_read, 6u);
  EXPECT_EQ(r.corpus.size(), 2u);
  EXPECT_EQ(r.errors.size(), 4u);
  ASSERT_NE(r.corpus.find("5"), nullptr);
  EXPECT_EQ(r.corpus.find("5")->posted_at, (PostDate{2023, 2, 28}));
}

TEST(Corpus, IngestJsonl) {
  std::istringstream in(
      "{\"tweet_id\": 10, \"text\": \"hi\", \"author_id\": \"x\", \"created_at\": \"2015-03-01\"}\n"
      "not json\n"
      "{\"tweet_id\": \"11\", \"text\": \"hi\"}\n");
  auto r = ingest_corpus(in, CorpusFormat::Jsonl);
  EXPECT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.errors.size(), 2u);
  EXPECT_NE(r.corpus.find("10"), nullptr);
}

TEST(Corpus, SimilarityIsOneMinusNormalizedDistance) {
  EXPECT_NEAR(similarity("The qick brown fox", "The quick brown fox"), 1.0 - 1.0 / 19.0, 1e-12);
  EXPECT_DOUBLE_EQ(similarity("abc", "abc"), 1.0);
  EXPECT_DOUBLE_EQ(similarity("abc", "xyz"), 0.0);
  EXPECT_EQ(edit_distance(U"kitten", U"sitting"), 3u);
}

TEST(Corpus, BoundedEditDistanceAgreesWithFull) {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    std::u32string a, b;
    for (std::size_t k = rng.uniform_index(12); k > 0; --k) a.push_back(U'a' + static_cast<char32_t>(rng.uniform_index(3)));
    for (std::size_t k = rng.uniform_index(12); k > 0; --k) b.push_back(U'a' + static_cast<char32_t>(rng.uniform_index(3)));
    std::size_t full = edit_distance(a, b);
    std::size_t bound = rng.uniform_index(8);
    std::size_t got = bounded_edit_distance(a, b, bound);
    if (full <= bound) {
      EXPECT_EQ(got, full);
    } else {
      EXPECT_GT(got, bound);
    }
  }
}

namespace {

Corpus small_corpus() {
  return Corpus({{"100", "Our schools need funding now", "a1", {2019, 5, 1}},
                 {"101", "Proud to introduce the clean water act", "a2", {2020, 6, 1}},
                 {"102", "Happy birthday to my colleague", "a1", {2021, 7, 1}},
                 {"103", "Happy birthday to my colleague", "a3", {2021, 7, 2}}});
}

}  // namespace

TEST(Corpus, RestoreExactFuzzyDuplicateAndMiss) {
  auto corpus = small_corpus();
  std::vector<RawLabeledRecord> raw{{"our schools need  FUNDING now", 1, 1, 2019},
                                    {"Proud to introduce the clean watr act", 2, 2, 2020},
                                    {"Happy birthday to my colleague", 3, 3, 2021},
                                    {"completely unrelated sentence here", 1, 2, 2019}};
  auto r = restore_ids(raw, corpus);
  ASSERT_EQ(r.matched.size(), 1u);
  EXPECT_EQ(r.matched[0].tweet.id, "100");
  ASSERT_EQ(r.review_queue.size(), 2u);
  EXPECT_EQ(r.review_queue[0].candidates.size(), 1u);
  EXPECT_EQ(r.review_queue[0].candidates[0].tweet_id, "101");
  EXPECT_EQ(r.review_queue[1].candidates.size(), 2u);
  ASSERT_EQ(r.discarded.size(), 1u);
  EXPECT_EQ(r.discarded[0].record_index, 3u);

  auto accepted = accept_all_review(r.review_queue, raw, corpus);
  EXPECT_EQ(accepted.accepted.size(), 1u);
  EXPECT_EQ(accepted.pending.size(), 1u);
}

TEST(Corpus, ReviewManifestRoundTripAndDecisions) {
  auto corpus = small_corpus();
  std::vector<RawLabeledRecord> raw{{"Happy birthday to my colleague", 3, 3, 2021}};
  auto r = restore_ids(raw, corpus);
  std::stringstream ss;
  write_review_manifest(ss, r.review_queue);
  auto entries = read_review_manifest(ss);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].decision, ReviewDecision::Pending);
  entries[1].decision = ReviewDecision::Accept;
  entries[0].decision = ReviewDecision::Reject;
  auto outcome = apply_review(r.review_queue, raw, corpus, entries);
  ASSERT_EQ(outcome.accepted.size(), 1u);
  EXPECT_EQ(outcome.accepted[0].tweet.id, entries[1].candidate_tweet_id);
  entries[0].decision = ReviewDecision::Accept;
  EXPECT_THROW(apply_review(r.review_queue, raw, corpus, entries), DataError);
}

TEST(Corpus, RestoreRejectsBadThreshold) {
  auto corpus = small_corpus();
  RestoreOptions o;
  o.threshold = 1.5;
  EXPECT_THROW(restore_ids({}, corpus, o), ConfigError);
  EXPECT_THROW(restore_ids({}, Corpus{}), DataError);
}

TEST(Corpus, ValidationRemovesInvalidCodes) {
  std::vector<MatchedRecord> m{{0, {"x", 1, 2, 2020}, {"1", "x", "a", {2020, 1, 1}}, 1.0},
                               {1, {"y", 4, 2, 2020}, {"2", "y", "a", {2020, 1, 1}}, 1.0}};
  auto v = validate_labels(m);
  ASSERT_EQ(v.labeled.size(), 1u);
  ASSERT_EQ(v.removed.size(), 1u);
  EXPECT_EQ(v.removed[0].tweet_id, "2");
  EXPECT_NE(v.removed[0].reason.find("4"), std::string::npos);
}

TEST(Corpus, LabeledCsvRoundTrip) {
  auto set = synthetic_label_set(1, 30);
  std::stringstream ss;
  write_labeled_csv(ss, set);
  auto back = read_labeled_csv(ss);
  ASSERT_EQ(back.size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(back[i].tweet.id, set[i].tweet.id);
    EXPECT_EQ(back[i].label_ar, set[i].label_ar);
    EXPECT_EQ(back[i].label_mb, set[i].label_mb);
    EXPECT_EQ(back[i].tweet.posted_at, set[i].tweet.posted_at);
  }
}

// ---------------------------------------------------------------------------
// partition

namespace {

std::set<std::string> as_set(const SplitManifest& m) { return {m.member_ids.begin(), m.member_ids.end()}; }

std::unordered_map<std::string, Category> label_map(const LabeledSet& s) {
  std::unordered_map<std::string, Category> out;
  for (const auto& e : s) out[e.tweet.id] = e.label_ar;
  return out;
}

std::array<std::size_t, 3> class_counts(const SplitManifest& m, const std::unordered_map<std::string, Category>& l) {
  std::array<std::size_t, 3> c{};
  for (const auto& id : m.member_ids) ++c[index_of(l.at(id))];
  return c;
}

}  // namespace

TEST(Partition, ApportionIsExactAndLargestRemainder) {
  std::array<double, 3> f{0.6, 0.2, 0.2};
  EXPECT_EQ(apportion(5, f), (std::vector<std::size_t>{3, 1, 1}));
  EXPECT_EQ(apportion(7, f), (std::vector<std::size_t>{4, 2, 1}));
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    std::size_t n = rng.uniform_index(1000);
    auto c = apportion(n, f);
    EXPECT_EQ(c[0] + c[1] + c[2], n);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(std::abs(static_cast<double>(c[k]) - f[k] * n), 1.0);
  }
}

TEST(Partition, SplitTreePropertiesOnRandomLabelSets) {
  Rng seeds(77);
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t n = 100 + seeds.uniform_index(140);
    auto set = synthetic_label_set(seeds.next(), n, 0.85);
    SplitTreeOptions o;
    o.global_seed = seeds.next();
    o.test_per_year = 1 + seeds.uniform_index(3);
    auto b = build_split_tree(set, o);
    auto labels = label_map(set);

    auto label = as_set(b.at("LABEL"));
    auto test = as_set(b.at("TEST"));
    auto train = as_set(b.at("TRAIN"));
    ASSERT_EQ(label.size(), n);
    ASSERT_EQ(test.size() + train.size(), n);
    for (const auto& id : test) ASSERT_FALSE(train.count(id));

    for (const auto& [parent, kids] : std::vector<std::pair<std::string, std::vector<std::string>>>{
             {"TRAIN", {"DEV_FIT", "DEV_VALIDATE", "DEV_TEST"}}, {"TRAIN", {"FIT", "VALIDATE"}}}) {
      std::size_t total = 0;
      std::set<std::string> seen;
      for (const auto& k : kids) {
        const auto& m = b.at(k);
        total += m.size();
        for (const auto& id : m.member_ids) {
          ASSERT_TRUE(train.count(id));
          ASSERT_TRUE(seen.insert(id).second);
        }
      }
      ASSERT_EQ(total, train.size());
    }

    // Stratification: each class share within one item of its exact value.
    auto train_counts = class_counts(b.at("TRAIN"), labels);
    auto fit_counts = class_counts(b.at("FIT"), labels);
    for (std::size_t c = 0; c < 3; ++c) {
      ASSERT_LE(std::abs(static_cast<double>(fit_counts[c]) - 0.8 * static_cast<double>(train_counts[c])), 1.0);
    }

    for (const auto& id : b.at("TRAIN_AGREE").member_ids) {
      ASSERT_TRUE(train.count(id));
    }

    std::set<std::string> covered;
    for (std::size_t f = 0; f < 7; ++f) {
      auto ct = as_set(b.at("CROSS_TEST[" + std::to_string(f) + "]"));
      auto cf = b.at("CROSS_FIT[" + std::to_string(f) + "]");
      auto cv = b.at("CROSS_VALIDATE[" + std::to_string(f) + "]");
      ASSERT_EQ(ct.size() + cf.size() + cv.size(), n);
      for (const auto& id : ct) ASSERT_TRUE(covered.insert(id).second);
      ASSERT_GE(ct.size(), n / 7);
      ASSERT_LE(ct.size(), n / 7 + 1);
    }
    ASSERT_EQ(covered.size(), n);
  }
}

TEST(Partition, SameSeedSameSplits) {
  auto set = synthetic_label_set(5, 120);
  SplitTreeOptions o;
  o.test_per_year = 2;
  auto a = build_split_tree(set, o);
  auto b = build_split_tree(set, o);
  EXPECT_EQ(a.splits, b.splits);
  o.global_seed = 2026;
  auto c = build_split_tree(set, o);
  EXPECT_NE(a.at("TEST").member_ids, c.at("TEST").member_ids);
}

TEST(Partition, TestCarveTakesPerYearAndRecordsShortfall) {
  std::vector<YearItem> items;
  for (int y = 2012; y <= 2021; ++y) {
    std::size_t count = y == 2019 ? 49 : 80;
    for (std::size_t i = 0; i < count; ++i) items.push_back({std::to_string(y) + "_" + std::to_string(i), y});
  }
  items.push_back({"early", 2009});
  auto c = carve_test(items, 50, 2012, 2021, 1);
  EXPECT_EQ(c.test.size(), 499u);
  EXPECT_EQ(c.train.size(), items.size() - 499);
  ASSERT_EQ(c.shortfalls.size(), 1u);
  EXPECT_EQ(c.shortfalls.at(2019), 49u);
}

TEST(Partition, ExcludedItemsConsumeTestSlots) {
  auto set = synthetic_label_set(9, 200);
  std::vector<YearItem> excluded;
  for (int i = 0; i < 30; ++i) excluded.push_back({"removed" + std::to_string(i), 2015});
  SplitTreeOptions o;
  o.test_per_year = 5;
  auto b = build_split_tree(set, o, excluded);
  for (const auto& s : b.splits) {
    for (const auto& id : s.member_ids) ASSERT_EQ(id.rfind("removed", 0), std::string::npos) << s.name;
  }
  EXPECT_EQ(b.at("TEST").size() + b.at("TRAIN").size(), 200u);
}

TEST(Partition, KFoldSizesForFullLabelSet) {
  std::vector<StratItem> items;
  auto labels = random_labels(4, 3966, {0.4, 0.2, 0.4});
  for (std::size_t i = 0; i < labels.size(); ++i) items.push_back({std::to_string(i), labels[i]});
  auto folds = make_kfold(items, {}, 3);
  ASSERT_EQ(folds.folds.size(), 7u);
  std::set<std::size_t> sizes;
  for (const auto& f : folds.folds) sizes.insert(f.cross_test.size());
  EXPECT_EQ(sizes, (std::set<std::size_t>{566, 567}));
}

TEST(Partition, RejectsBadInputs) {
  std::vector<StratItem> items{{"a", Category::Problem}, {"b", Category::Solution}};
  KFoldOptions o;
  EXPECT_THROW(make_kfold(items, o, 1), DataError);
  o.k = 1;
  EXPECT_THROW(make_kfold(items, o, 1), ConfigError);
  SplitManifest parent{"P", {"a", "b"}, 0, {}};
  std::array<double, 2> bad{0.5, 0.6};
  std::array<std::string, 2> names{"x", "y"};
  EXPECT_THROW(stratified_split(parent, items, bad, names, 1), ConfigError);
}

TEST(Partition, BundleJsonRoundTrip) {
  auto set = synthetic_label_set(2, 90);
  auto b = build_split_tree(set, {});
  std::stringstream ss;
  write_split_bundle(ss, b);
  auto back = read_split_bundle(ss);
  EXPECT_EQ(back.splits, b.splits);
  EXPECT_EQ(back.global_seed, b.global_seed);
  EXPECT_THROW(back.at("NOPE"), DataError);
}
