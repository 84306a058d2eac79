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

#include "polyframe/corpus/types.hpp"

#include <charconv>

#include <fmt/format.h>

#include "polyframe/common/text.hpp"

namespace polyframe {

std::optional<Category> category_from_code(int code) {
  if (code < 1 || code > 3) return std::nullopt;
  return static_cast<Category>(code);
}

std::string_view category_name(Category c) {
  switch (c) {
    case Category::Problem:
      return "problem";
    case Category::Solution:
      return "solution";
    case Category::Other:
      return "other";
  }
  return "?";
}

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::optional<PostDate> parse_date(std::string_view s) {
  s = text::trim(s);
  const auto cut = s.find_first_of("T ");
  if (cut != std::string_view::npos) s = s.substr(0, cut);
  if (s.empty()) return std::nullopt;

  const char sep = s.find('/') != std::string_view::npos ? '/' : '-';
  const auto parts = text::split(s, sep);
  if (parts.size() > 3 || parts[0].size() != 4) return std::nullopt;

  PostDate d;
  if (!parse_int(parts[0], d.year)) return std::nullopt;
  if (parts.size() >= 2) {
    if (!parse_int(parts[1], d.month) || d.month < 1 || d.month > 12) return std::nullopt;
  }
  if (parts.size() == 3) {
    if (!parse_int(parts[2], d.day) || d.day < 1 || d.day > 31) return std::nullopt;
  }
  return d;
}

std::string format_date(const PostDate& d) {
  if (d.month == 0) return fmt::format("{:04d}", d.year);
  if (d.day == 0) return fmt::format("{:04d}-{:02d}", d.year, d.month);
  return fmt::format("{:04d}-{:02d}-{:02d}", d.year, d.month, d.day);
}

}  // namespace polyframe
