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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polyframe/corpus/corpus.hpp"

namespace polyframe {

// Named, seeded assignment of example ids to a partition.
struct SplitManifest {
  std::string name;
  std::vector<std::string> member_ids;
  std::uint64_t seed = 0;
  std::optional<std::string> parent;

  std::size_t size() const { return member_ids.size(); }
  bool operator==(const SplitManifest&) const = default;
};

struct Fold {
  SplitManifest cross_fit;
  SplitManifest cross_validate;
  SplitManifest cross_test;
};

struct FoldSet {
  std::size_t k = 0;
  std::vector<Fold> folds;
};

// Which coder's labels are used as training targets / for stratification.
enum class LabelSource { Ar, Mb, AgreeOnly };

std::optional<LabelSource> label_source_from_string(std::string_view s);
std::string_view to_string(LabelSource s);

// Label of an example under the given source (AgreeOnly uses AR, which equals
// MB on the agreement subset).
Category label_of(const LabeledExample& e, LabelSource source);

// Item to stratify: an id and its class.
struct StratItem {
  std::string id;
  Category label = Category::Other;
};

struct YearItem {
  std::string id;
  int year = 0;
};

struct TestCarve {
  SplitManifest test;
  SplitManifest train;
  // Years that supplied fewer than the requested count, with the count taken.
  std::map<int, std::size_t> shortfalls;
};

// Samples `per_year` items uniformly from each year in [first_year, last_year]
// (all of them when a year has fewer). TRAIN keeps every other item in input
// order. Throws ConfigError on an empty year range.
TestCarve carve_test(std::span<const YearItem> items, std::size_t per_year, int first_year, int last_year,
                     std::uint64_t seed, const std::string& parent = "LABEL");

// Splits `parent` into one manifest per fraction. Per class, counts are the
// class total times each fraction, rounded by largest remainder (ties to the
// earlier split). Throws ConfigError for invalid fractions and DataError when
// a present class has fewer items than there are splits.
std::vector<SplitManifest> stratified_split(const SplitManifest& parent, std::span<const StratItem> labels,
                                            std::span<const double> fractions, std::span<const std::string> names,
                                            std::uint64_t seed);

// Largest-remainder apportionment of `total` by `fractions`.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> fractions);

// Examples on which both coders agree.
LabeledSet agreement_subset(std::span<const LabeledExample> train);

struct KFoldOptions {
  std::size_t k = 7;
  double fit_fraction = 0.8;
  bool stratify_folds = true;
};

// k disjoint CROSS_TEST sets covering `items`; per fold the remainder is split
// fit_fraction / (1 - fit_fraction) into CROSS_FIT and CROSS_VALIDATE.
FoldSet make_kfold(std::span<const StratItem> items, const KFoldOptions& options, std::uint64_t seed,
                   const std::string& parent = "LABEL");

// Copy of `m` without the ids in `drop_ids`, order preserved.
SplitManifest restrict_to(const SplitManifest& m, const std::vector<std::string>& drop_ids);

struct SplitTreeOptions {
  std::uint64_t global_seed = 2025;
  std::size_t test_per_year = 50;
  int test_first_year = 2012;
  int test_last_year = 2021;
  LabelSource label_source = LabelSource::Ar;
  KFoldOptions kfold;
};

// Every partition of the labeled-data tree: LABEL, TEST, TRAIN, TRAIN_AGREE,
// DEV_FIT/DEV_VALIDATE/DEV_TEST, FIT/VALIDATE, FIT_AGREE/VALIDATE_AGREE and
// CROSS_FIT[i]/CROSS_VALIDATE[i]/CROSS_TEST[i].
struct SplitBundle {
  std::uint64_t global_seed = 0;
  std::vector<SplitManifest> splits;
  std::map<int, std::size_t> test_shortfalls;

  const SplitManifest* find(std::string_view name) const;
  const SplitManifest& at(std::string_view name) const;  // throws DataError
};

// `excluded_from_test` lists ids that take part in the TEST carve but are then
// dropped (records removed by label validation after the carve).
SplitBundle build_split_tree(std::span<const LabeledExample> label_set, const SplitTreeOptions& options,
                             std::span<const YearItem> excluded_from_test = {});

void write_split_bundle(std::ostream& out, const SplitBundle& bundle);
SplitBundle read_split_bundle(std::istream& in);
SplitBundle read_split_bundle(const std::filesystem::path& path);

// Selects the examples of `set` named by the manifest, in manifest order.
// Throws DataError if an id is missing from `set`.
LabeledSet select(std::span<const LabeledExample> set, const SplitManifest& m);

}  // namespace polyframe
