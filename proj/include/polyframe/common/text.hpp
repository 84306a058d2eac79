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

#include <string>
#include <string_view>
#include <vector>

namespace polyframe::text {

// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD so corrupted
// input still produces a comparable sequence.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

// Simple case folding: ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
char32_t fold_case(char32_t c);

bool is_space(char32_t c);

std::string_view trim(std::string_view s);

// Case-folded, whitespace-collapsed and trimmed form used for matching.
std::u32string normalize_for_match(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

std::string to_lower_ascii(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace polyframe::text
