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

#include "polyframe/common/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include <fmt/format.h>

#include "polyframe/common/error.hpp"
#include "polyframe/common/text.hpp"

namespace polyframe::config {

std::vector<Entry> parse(std::istream& in, const std::string& source) {
  std::vector<Entry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", source, n));
    Entry e{std::string(text::trim(t.substr(0, eq))), std::string(text::trim(t.substr(eq + 1))),
            fmt::format("{}:{}", source, n)};
    if (e.key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, n));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Entry> parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  return parse(in, path.string());
}

Entry parse_override(std::string_view s) {
  const auto eq = s.find('=');
  if (eq == std::string_view::npos) throw ConfigError(fmt::format("override '{}' is not key=value", s));
  Entry e{std::string(text::trim(s.substr(0, eq))), std::string(text::trim(s.substr(eq + 1))), "override"};
  if (e.key.empty()) throw ConfigError(fmt::format("override '{}' has an empty key", s));
  return e;
}

namespace {

template <typename N>
N parse_number(const Entry& e, const char* what) {
  N v{};
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end || e.value.empty()) {
    throw ConfigError(fmt::format("{} must be {} (got '{}', {})", e.key, what, e.value, e.origin));
  }
  return v;
}

}  // namespace

double to_real(const Entry& e) { return parse_number<double>(e, "a number"); }
std::int64_t to_int(const Entry& e) { return parse_number<std::int64_t>(e, "an integer"); }
std::uint64_t to_uint(const Entry& e) { return parse_number<std::uint64_t>(e, "a non-negative integer"); }

bool to_bool(const Entry& e) {
  const auto v = text::to_lower_ascii(e.value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{} must be a boolean (got '{}', {})", e.key, e.value, e.origin));
}

std::size_t to_positive(const Entry& e) {
  std::int64_t v = 0;
  try {
    v = to_int(e);
  } catch (const ConfigError&) {
    throw ConfigError(fmt::format("{} must be positive (got '{}', {})", e.key, e.value, e.origin));
  }
  if (v <= 0) throw ConfigError(fmt::format("{} must be positive (got '{}', {})", e.key, e.value, e.origin));
  return static_cast<std::size_t>(v);
}

}  // namespace polyframe::config
