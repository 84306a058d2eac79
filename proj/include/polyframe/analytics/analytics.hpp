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
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polyframe/corpus/types.hpp"

namespace polyframe {

enum class Party { D, R, I, Other };

// Accepts D/R/I and the full party names, case-insensitively; anything else is Other.
Party party_from_string(std::string_view s);
std::string_view to_string(Party p);

struct SenatorMetadata {
  std::string author_id;
  Party party = Party::Other;
  std::string gender;
  std::string race;
  std::string state;
};

class MetadataTable {
 public:
  // Throws DataError on a duplicate author_id.
  void add(SenatorMetadata m);
  const SenatorMetadata* find(std::string_view author_id) const;
  std::size_t size() const { return rows_.size(); }
  const std::map<std::string, SenatorMetadata, std::less<>>& rows() const { return rows_; }

 private:
  std::map<std::string, SenatorMetadata, std::less<>> rows_;
};

// Columns author_id, party, gender, race, state. Throws DataError on a
// missing column, an empty author_id or a duplicate author_id.
MetadataTable load_metadata(std::istream& in);
MetadataTable load_metadata(const std::filesystem::path& path);

struct LabeledTweet {
  Tweet tweet;
  Category label = Category::Other;
};

// Columns tweet_id, author_id, created_at, label (text is optional). Rows with
// an unparseable date are kept with an unset date so aggregation can report them.
std::vector<LabeledTweet> read_labeled_tweets(std::istream& in);
std::vector<LabeledTweet> read_labeled_tweets(const std::filesystem::path& path);

enum class GroupBy { Party, Gender, Race, None };

std::optional<GroupBy> group_by_from_string(std::string_view s);
std::string_view to_string(GroupBy g);

inline constexpr std::string_view kUnknownGroup = "unknown";
inline constexpr std::string_view kAllGroup = "all";

struct MonthlyAggregate {
  int year = 0;
  int month = 0;
  std::string group;
  std::array<std::size_t, kNumCategories> counts{};
  std::size_t total = 0;

  // 0 when total is 0.
  double proportion(Category c) const;
};

struct MonthSpan {
  int first_year = 2008;
  int first_month = 1;
  int last_year = 2023;
  int last_month = 2;

  std::size_t months() const;
};

struct AggregateResult {
  GroupBy group_by = GroupBy::None;
  MonthSpan span;
  std::vector<MonthlyAggregate> rows;  // ordered by (month, group)
  std::vector<std::string> groups;     // sorted
  std::vector<std::string> excluded;   // tweet ids without a usable year-month
  std::set<std::string> unknown_authors;
  std::size_t counted = 0;
};

// Buckets tweets per (month, group). Every group seen gets every month of the
// span, zero-filled; without an explicit span it runs from the earliest to the
// latest valid month in the input. Tweets whose date lacks a month, or falls
// outside an explicit span, are excluded and logged. Authors missing from the
// metadata fall under "unknown".
AggregateResult aggregate_monthly(std::span<const LabeledTweet> tweets, const MetadataTable& metadata,
                                  GroupBy group_by, std::optional<MonthSpan> span = std::nullopt);

// Writes the tidy CSVs for the aggregate's grouping plus SVG renderings:
// party gives fig4_party_counts and fig5_party_labels, gender gives
// fig6_gender_labels, race gives fig6_race_labels, none gives labels_overall.
// An aggregate without tweets yields header-only CSVs, no images and a
// warning. Returns the written paths. Throws Error when out_dir is unwritable.
std::vector<std::filesystem::path> emit_figures(const AggregateResult& agg, const std::filesystem::path& out_dir);

// month, group, total
void write_counts_csv(std::ostream& out, const AggregateResult& agg);
// month, group, count_1, count_2, count_3, total, prop_1, prop_2, prop_3
void write_labels_csv(std::ostream& out, const AggregateResult& agg);

}  // namespace polyframe
