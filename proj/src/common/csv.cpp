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

#include "polyframe/common/csv.hpp"

#include <fmt/format.h>

#include "polyframe/common/error.hpp"

namespace polyframe::csv {

bool Reader::next(Record& out) {
  out.fields.clear();
  out.line = line_;

  if (!started_) {
    started_ = true;
    if (in_.peek() == 0xEF) {
      char bom[3];
      in_.read(bom, 3);
      if (!(static_cast<unsigned char>(bom[1]) == 0xBB && static_cast<unsigned char>(bom[2]) == 0xBF)) {
        in_.seekg(0);
      }
    }
  }

  int c = in_.get();
  if (c == std::char_traits<char>::eof()) return false;

  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (;; c = in_.get()) {
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw DataError(fmt::format("line {}: unterminated quoted field", out.line));
      out.fields.push_back(std::move(field));
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (ch == sep_) {
      out.fields.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (ch == '\r') {
      if (in_.peek() == '\n') continue;
      ++line_;
      out.fields.push_back(std::move(field));
      return true;
    } else if (ch == '\n') {
      ++line_;
      out.fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
}

Table::Table(std::istream& in, char sep) : reader_(in, sep) {
  Record rec;
  if (!reader_.next(rec)) throw DataError("empty CSV input: header row missing");
  header_ = std::move(rec.fields);
  for (std::size_t i = 0; i < header_.size(); ++i) index_.emplace(header_[i], i);
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Table::require(const std::vector<std::string>& names) const {
  std::string missing;
  for (const auto& n : names) {
    if (!index_.count(n)) missing += (missing.empty() ? "" : ", ") + n;
  }
  if (!missing.empty()) throw DataError("CSV header is missing required column(s): " + missing);
}

std::string escape(std::string_view field, char sep) {
  const bool needs_quotes = field.find_first_of(std::string{sep, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields, char sep) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << sep;
    out << escape(fields[i], sep);
  }
  out << '\n';
}

}  // namespace polyframe::csv
