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
#include <string>
#include <string_view>
#include <vector>

namespace polyframe::config {

struct Entry {
  std::string key;
  std::string value;
  std::string origin;  // "file:line" or "override"
};

// "key = value" lines; blank lines and lines starting with '#' are skipped.
// Throws ConfigError on a line without '=' or an empty key.
std::vector<Entry> parse(std::istream& in, const std::string& source);
std::vector<Entry> parse_file(const std::filesystem::path& path);

// "key=value" from the command line.
Entry parse_override(std::string_view text);

// Typed conversions; errors name the key.
double to_real(const Entry& e);
std::int64_t to_int(const Entry& e);
std::uint64_t to_uint(const Entry& e);
bool to_bool(const Entry& e);

// Positive-integer field; "batch_size must be positive" style errors.
std::size_t to_positive(const Entry& e);

}  // namespace polyframe::config
