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

#include "polyframe/partition/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "polyframe/common/error.hpp"
#include "polyframe/common/rng.hpp"

namespace polyframe {

using nlohmann::json;

std::optional<LabelSource> label_source_from_string(std::string_view s) {
  if (s == "ar") return LabelSource::Ar;
  if (s == "mb") return LabelSource::Mb;
  if (s == "agree-only" || s == "agree") return LabelSource::AgreeOnly;
  return std::nullopt;
}

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::Ar:
      return "ar";
    case LabelSource::Mb:
      return "mb";
    case LabelSource::AgreeOnly:
      return "agree-only";
  }
  return "ar";
}

Category label_of(const LabeledExample& e, LabelSource source) {
  return source == LabelSource::Mb ? e.label_mb : e.label_ar;
}

TestCarve carve_test(std::span<const YearItem> items, std::size_t per_year, int first_year, int last_year,
                     std::uint64_t seed, const std::string& parent) {
  if (last_year < first_year) throw ConfigError(fmt::format("empty TEST year range {}..{}", first_year, last_year));

  Rng rng(seed);
  std::unordered_set<std::string> chosen;
  TestCarve out;
  out.test = {"TEST", {}, seed, parent};
  out.train = {"TRAIN", {}, seed, parent};

  for (int year = first_year; year <= last_year; ++year) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].year == year) pool.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(pool));
    const std::size_t take = std::min(per_year, pool.size());
    if (take < per_year) {
      out.shortfalls[year] = take;
      spdlog::warn("TEST carve: year {} has only {} of {} requested items", year, take, per_year);
    }
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    for (std::size_t i : pool) {
      out.test.member_ids.push_back(items[i].id);
      chosen.insert(items[i].id);
    }
  }
  for (const auto& it : items) {
    if (!chosen.count(it.id)) out.train.member_ids.push_back(it.id);
  }
  return out;
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> fractions) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = static_cast<double>(total) * fractions[i];
    // Guard against 0.6 * 5 = 2.9999999999999996 style representation error.
    const double fl = std::floor(exact + 1e-9);
    counts[i] = static_cast<std::size_t>(fl);
    assigned += counts[i];
    remainders.emplace_back(std::max(0.0, exact - fl), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++counts[remainders[r % remainders.size()].second];
  return counts;
}

namespace {

void check_fractions(std::span<const double> fractions) {
  if (fractions.empty()) throw ConfigError("at least one split fraction is required");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError(fmt::format("split fraction {} must be positive", f));
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(fmt::format("split fractions sum to {}, not 1", sum));
}

}  // namespace

std::vector<SplitManifest> stratified_split(const SplitManifest& parent, std::span<const StratItem> labels,
                                            std::span<const double> fractions, std::span<const std::string> names,
                                            std::uint64_t seed) {
  check_fractions(fractions);
  if (names.size() != fractions.size()) throw ConfigError("one split name is required per fraction");

  std::unordered_map<std::string, Category> label_of_id;
  for (const auto& it : labels) label_of_id.emplace(it.id, it.label);

  // Members per class, in parent order.
  std::array<std::vector<std::size_t>, kNumCategories> by_class;
  for (std::size_t i = 0; i < parent.member_ids.size(); ++i) {
    auto it = label_of_id.find(parent.member_ids[i]);
    if (it == label_of_id.end()) throw DataError("no label for id " + parent.member_ids[i]);
    by_class[index_of(it->second)].push_back(i);
  }

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> members(fractions.size());
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    auto& pool = by_class[c];
    if (pool.empty()) continue;
    if (pool.size() < fractions.size()) {
      throw DataError(fmt::format("class '{}' has {} item(s), fewer than the {} requested splits",
                                  category_name(category_at(c)), pool.size(), fractions.size()));
    }
    rng.shuffle(std::span<std::size_t>(pool));
    const auto counts = apportion(pool.size(), fractions);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      members[s].insert(members[s].end(), pool.begin() + offset, pool.begin() + offset + counts[s]);
      offset += counts[s];
    }
  }

  std::vector<SplitManifest> out;
  for (std::size_t s = 0; s < fractions.size(); ++s) {
    std::sort(members[s].begin(), members[s].end());
    SplitManifest m{names[s], {}, seed, parent.name};
    m.member_ids.reserve(members[s].size());
    for (std::size_t i : members[s]) m.member_ids.push_back(parent.member_ids[i]);
    out.push_back(std::move(m));
  }
  return out;
}

LabeledSet agreement_subset(std::span<const LabeledExample> train) {
  LabeledSet out;
  for (const auto& e : train) {
    if (e.label_ar == e.label_mb) out.push_back(e);
  }
  return out;
}

FoldSet make_kfold(std::span<const StratItem> items, const KFoldOptions& options, std::uint64_t seed,
                   const std::string& parent) {
  const std::size_t k = options.k;
  if (k < 2) throw ConfigError("k-fold cross validation needs k >= 2");
  if (k > items.size()) throw DataError(fmt::format("k = {} exceeds the {} available items", k, items.size()));

  Rng rng(seed);
  // Deal shuffled items round-robin; with stratification each class is dealt
  // in turn so every fold receives a near-equal share of every class.
  std::vector<std::size_t> order;
  if (options.stratify_folds) {
    for (Category c : kCategories) {
      std::vector<std::size_t> cls;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].label == c) cls.push_back(i);
      }
      rng.shuffle(std::span<std::size_t>(cls));
      order.insert(order.end(), cls.begin(), cls.end());
    }
  } else {
    order.resize(items.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
  }
  std::vector<std::vector<std::size_t>> test_members(k);
  for (std::size_t pos = 0; pos < order.size(); ++pos) test_members[pos % k].push_back(order[pos]);

  FoldSet out;
  out.k = k;
  const std::array<double, 2> fractions{options.fit_fraction, 1.0 - options.fit_fraction};
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<bool> in_test(items.size(), false);
    for (std::size_t i : test_members[f]) in_test[i] = true;

    Fold fold;
    fold.cross_test = {fmt::format("CROSS_TEST[{}]", f), {}, seed, parent};
    SplitManifest cross_train{fmt::format("CROSS_TRAIN[{}]", f), {}, seed, parent};
    for (std::size_t i = 0; i < items.size(); ++i) {
      (in_test[i] ? fold.cross_test : cross_train).member_ids.push_back(items[i].id);
    }
    const std::array<std::string, 2> names{fmt::format("CROSS_FIT[{}]", f), fmt::format("CROSS_VALIDATE[{}]", f)};
    auto parts = stratified_split(cross_train, items, fractions, names, derive_seed(seed, names[0]));
    fold.cross_fit = std::move(parts[0]);
    fold.cross_validate = std::move(parts[1]);
    out.folds.push_back(std::move(fold));
  }
  return out;
}

SplitManifest restrict_to(const SplitManifest& m, const std::vector<std::string>& drop_ids) {
  std::unordered_set<std::string> drop(drop_ids.begin(), drop_ids.end());
  SplitManifest out = m;
  out.member_ids.clear();
  for (const auto& id : m.member_ids) {
    if (!drop.count(id)) out.member_ids.push_back(id);
  }
  return out;
}

const SplitManifest* SplitBundle::find(std::string_view name) const {
  for (const auto& s : splits) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const SplitManifest& SplitBundle::at(std::string_view name) const {
  const auto* s = find(name);
  if (!s) throw DataError(fmt::format("split '{}' not found in bundle", name));
  return *s;
}

namespace {

std::vector<StratItem> strat_items(std::span<const LabeledExample> set, LabelSource source) {
  std::vector<StratItem> out;
  out.reserve(set.size());
  for (const auto& e : set) out.push_back({e.tweet.id, label_of(e, source)});
  return out;
}

}  // namespace

SplitBundle build_split_tree(std::span<const LabeledExample> label_set, const SplitTreeOptions& o,
                             std::span<const YearItem> excluded_from_test) {
  SplitBundle b;
  b.global_seed = o.global_seed;

  SplitManifest label{"LABEL", {}, o.global_seed, std::nullopt};
  std::vector<YearItem> years;
  for (const auto& e : label_set) {
    label.member_ids.push_back(e.tweet.id);
    years.push_back({e.tweet.id, e.tweet.posted_at.year});
  }
  std::vector<std::string> excluded;
  for (const auto& x : excluded_from_test) {
    years.push_back(x);
    excluded.push_back(x.id);
  }
  b.splits.push_back(label);

  auto carve = carve_test(years, o.test_per_year, o.test_first_year, o.test_last_year,
                          derive_seed(o.global_seed, "TEST"));
  carve.test = restrict_to(carve.test, excluded);
  carve.train = restrict_to(carve.train, excluded);
  b.test_shortfalls = carve.shortfalls;
  b.splits.push_back(carve.test);
  b.splits.push_back(carve.train);

  const LabeledSet train = select(label_set, carve.train);
  const auto train_items = strat_items(train, o.label_source);

  SplitManifest train_agree{"TRAIN_AGREE", {}, o.global_seed, std::string("TRAIN")};
  for (const auto& e : agreement_subset(train)) train_agree.member_ids.push_back(e.tweet.id);
  b.splits.push_back(train_agree);

  const std::array<double, 3> dev_fractions{0.6, 0.2, 0.2};
  const std::array<std::string, 3> dev_names{"DEV_FIT", "DEV_VALIDATE", "DEV_TEST"};
  for (auto& m : stratified_split(carve.train, train_items, dev_fractions, dev_names, derive_seed(o.global_seed, "DEV")))
    b.splits.push_back(std::move(m));

  const std::array<double, 2> fv{0.8, 0.2};
  const std::array<std::string, 2> fv_names{"FIT", "VALIDATE"};
  for (auto& m : stratified_split(carve.train, train_items, fv, fv_names, derive_seed(o.global_seed, "FIT")))
    b.splits.push_back(std::move(m));

  if (!train_agree.member_ids.empty()) {
    const std::array<std::string, 2> agree_names{"FIT_AGREE", "VALIDATE_AGREE"};
    for (auto& m : stratified_split(train_agree, train_items, fv, agree_names, derive_seed(o.global_seed, "FIT_AGREE")))
      b.splits.push_back(std::move(m));
  }

  const auto label_items = strat_items(label_set, o.label_source);
  const FoldSet folds = make_kfold(label_items, o.kfold, derive_seed(o.global_seed, "KFOLD"));
  for (const auto& f : folds.folds) {
    b.splits.push_back(f.cross_fit);
    b.splits.push_back(f.cross_validate);
    b.splits.push_back(f.cross_test);
  }
  return b;
}

void write_split_bundle(std::ostream& out, const SplitBundle& bundle) {
  json splits = json::array();
  for (const auto& s : bundle.splits) {
    splits.push_back({{"name", s.name},
                      {"seed", s.seed},
                      {"parent", s.parent ? json(*s.parent) : json(nullptr)},
                      {"member_ids", s.member_ids}});
  }
  json shortfalls = json::object();
  for (const auto& [year, n] : bundle.test_shortfalls) shortfalls[std::to_string(year)] = n;
  json j{{"global_seed", bundle.global_seed}, {"test_shortfalls", shortfalls}, {"splits", splits}};
  out << j.dump(1) << '\n';
}

SplitBundle read_split_bundle(std::istream& in) {
  SplitBundle b;
  try {
    const json j = json::parse(in);
    b.global_seed = j.at("global_seed").get<std::uint64_t>();
    if (j.contains("test_shortfalls")) {
      for (const auto& [k, v] : j["test_shortfalls"].items()) b.test_shortfalls[std::stoi(k)] = v.get<std::size_t>();
    }
    for (const auto& s : j.at("splits")) {
      SplitManifest m;
      m.name = s.at("name").get<std::string>();
      m.seed = s.at("seed").get<std::uint64_t>();
      if (!s.at("parent").is_null()) m.parent = s.at("parent").get<std::string>();
      m.member_ids = s.at("member_ids").get<std::vector<std::string>>();
      b.splits.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed split bundle: ") + e.what());
  }
  return b;
}

SplitBundle read_split_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read split bundle " + path.string());
  return read_split_bundle(in);
}

LabeledSet select(std::span<const LabeledExample> set, const SplitManifest& m) {
  std::unordered_map<std::string_view, const LabeledExample*> by_id;
  for (const auto& e : set) by_id.emplace(e.tweet.id, &e);
  LabeledSet out;
  out.reserve(m.member_ids.size());
  for (const auto& id : m.member_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError(fmt::format("split '{}' names unknown id {}", m.name, id));
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace polyframe
