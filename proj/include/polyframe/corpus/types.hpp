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
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace polyframe {

// Framing category. The numeric values are the coding scheme's codes.
enum class Category : std::uint8_t { Problem = 1, Solution = 2, Other = 3 };

inline constexpr std::size_t kNumCategories = 3;
inline constexpr std::array<Category, kNumCategories> kCategories{Category::Problem, Category::Solution,
                                                                  Category::Other};

// Zero-based index (Problem=0, Solution=1, Other=2).
constexpr std::size_t index_of(Category c) { return static_cast<std::size_t>(c) - 1; }
constexpr Category category_at(std::size_t index) { return static_cast<Category>(index + 1); }
constexpr int code_of(Category c) { return static_cast<int>(c); }

std::optional<Category> category_from_code(int code);
std::string_view category_name(Category c);

// Calendar date with year resolution; month and day are 0 when unknown.
struct PostDate {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const PostDate&) const = default;
};

// Accepts YYYY, YYYY-MM, YYYY-MM-DD, optionally followed by a time part
// ("T..." or " ..."), and YYYY/MM/DD. Returns nullopt when unparseable.
std::optional<PostDate> parse_date(std::string_view s);
std::string format_date(const PostDate& d);

// Month index since year 0, used for contiguous monthly buckets.
constexpr int month_ordinal(int year, int month) { return year * 12 + (month - 1); }

struct Tweet {
  std::string id;
  std::string text;
  std::string author_id;
  PostDate posted_at;
};

}  // namespace polyframe
