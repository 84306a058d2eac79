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

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace polyframe::csv {

struct Record {
  std::size_t line = 0;  // 1-based line on which the record starts
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and
// newlines. A UTF-8 byte order mark at the start of the stream is skipped.
class Reader {
 public:
  explicit Reader(std::istream& in, char sep = ',') : in_(in), sep_(sep) {}

  // Returns false at end of input. Throws DataError on an unterminated quote.
  bool next(Record& out);

 private:
  std::istream& in_;
  char sep_;
  std::size_t line_ = 1;
  bool started_ = false;
};

// Header-addressed access to the records of a CSV file.
class Table {
 public:
  explicit Table(std::istream& in, char sep = ',');

  const std::vector<std::string>& header() const { return header_; }
  std::optional<std::size_t> column(std::string_view name) const;
  // Throws DataError naming the missing columns.
  void require(const std::vector<std::string>& names) const;

  bool next(Record& out) { return reader_.next(out); }

 private:
  Reader reader_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::string escape(std::string_view field, char sep = ',');

void write_row(std::ostream& out, const std::vector<std::string>& fields, char sep = ',');

}  // namespace polyframe::csv
