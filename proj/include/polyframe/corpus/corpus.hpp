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
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polyframe/corpus/types.hpp"

namespace polyframe {

// Collection of tweets with unique ids, in file order.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Tweet> tweets);

  // Returns false (and leaves the corpus unchanged) when the id is taken.
  bool add(Tweet tweet);

  const Tweet* find(std::string_view id) const;
  std::size_t size() const { return tweets_.size(); }
  bool empty() const { return tweets_.empty(); }
  const std::vector<Tweet>& tweets() const { return tweets_; }
  const Tweet& operator[](std::size_t i) const { return tweets_[i]; }

 private:
  std::vector<Tweet> tweets_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class CorpusFormat { Csv, Jsonl };

std::optional<CorpusFormat> format_from_path(const std::filesystem::path& path);

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct IngestOptions {
  // Inclusive span of acceptable posting months.
  PostDate earliest{2008, 1, 0};
  PostDate latest{2023, 2, 0};
};

struct IngestResult {
  Corpus corpus;
  std::size_t rows_read = 0;
  std::vector<RowError> errors;
};

// Reads a corpus file with fields tweet_id, text, author_id, created_at.
// Bad rows (missing field, empty text, unparseable or out-of-span date,
// duplicate id) are reported per line and skipped. Throws DataError if the
// file cannot be read or lacks a required column.
IngestResult ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                           const IngestOptions& options = {});
IngestResult ingest_corpus(std::istream& in, CorpusFormat format, const IngestOptions& options = {});

void write_corpus_csv(std::ostream& out, std::span<const Tweet> tweets);

// Pluggable language identification.
class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  // ISO 639-1 code of the text's language.
  virtual std::string detect(std::string_view text) const = 0;
};

// With `detector == nullptr` and `pass_through` set the corpus is returned
// unchanged (the distributed corpus is already filtered). Requesting
// filtering without a detector throws ConfigError.
Corpus filter_language(const Corpus& corpus, std::string_view keep, const LanguageDetector* detector,
                       bool pass_through = true);

// ---------------------------------------------------------------------------
// Fuzzy id restoration.

struct RawLabeledRecord {
  std::string text;
  int label_ar = 0;
  int label_mb = 0;
  int source_year = 0;  // 0 when unknown
};

// Reads the labeled file (text, label_ar, label_mb, year). Throws DataError on
// an unreadable file, missing column or non-integer label.
std::vector<RawLabeledRecord> read_raw_labeled(const std::filesystem::path& path);
std::vector<RawLabeledRecord> read_raw_labeled(std::istream& in);

// Levenshtein distance over code points.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);

// Edit distance if it is <= max_distance, otherwise any value > max_distance.
std::size_t bounded_edit_distance(std::u32string_view a, std::u32string_view b, std::size_t max_distance);

// 1 - d(a, b) / max(|a|, |b|) on normalized text; 1.0 for two empty strings.
double similarity_normalized(std::u32string_view a, std::u32string_view b);
double similarity(std::string_view a, std::string_view b);

struct MatchCandidate {
  std::string tweet_id;
  double score = 0.0;
};

// A labeled record paired with the corpus tweet it was restored to. Labels
// are still raw codes at this stage.
struct MatchedRecord {
  std::size_t record_index = 0;
  RawLabeledRecord raw;
  Tweet tweet;
  double score = 0.0;
};

struct ReviewItem {
  std::size_t record_index = 0;
  double score = 0.0;
  std::vector<MatchCandidate> candidates;  // every candidate tied at `score`
};

struct DiscardedRecord {
  std::size_t record_index = 0;
  std::optional<MatchCandidate> best;  // best candidate seen, if any was scored
};

struct RestoreOptions {
  double threshold = 0.80;
  // Restrict the fuzzy scan to tweets from the record's source year.
  bool same_year_only = false;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

struct RestoreResult {
  std::vector<MatchedRecord> matched;
  std::vector<ReviewItem> review_queue;
  std::vector<DiscardedRecord> discarded;
};

// Matches each raw record to the best-scoring corpus tweet. Exact matches
// (score 1.0, unique) are accepted; scores in [threshold, 1) and ties go to
// the review queue; the rest are discarded. Throws DataError on an empty
// corpus and ConfigError on a threshold outside (0, 1].
RestoreResult restore_ids(std::span<const RawLabeledRecord> raw, const Corpus& corpus,
                          const RestoreOptions& options = {});

enum class ReviewDecision { Pending, Accept, Reject };

struct ReviewManifestEntry {
  std::size_t record_index = 0;
  std::string candidate_tweet_id;
  double score = 0.0;
  ReviewDecision decision = ReviewDecision::Pending;
};

// One JSONL line per (record, candidate) with decision "pending".
void write_review_manifest(std::ostream& out, std::span<const ReviewItem> queue);
std::vector<ReviewManifestEntry> read_review_manifest(std::istream& in);

// Resolves the review queue with the decisions in `entries`. Accepted
// candidates become matched records; records with no accepted candidate stay
// unresolved and are returned in `pending`. Accepting two candidates for one
// record throws DataError.
struct ReviewOutcome {
  std::vector<MatchedRecord> accepted;
  std::vector<ReviewItem> pending;
  std::size_t rejected = 0;
};
ReviewOutcome apply_review(std::span<const ReviewItem> queue, std::span<const RawLabeledRecord> raw,
                           const Corpus& corpus, std::span<const ReviewManifestEntry> entries);

// Accept the top candidate of every review item; ties stay pending.
ReviewOutcome accept_all_review(std::span<const ReviewItem> queue, std::span<const RawLabeledRecord> raw,
                                const Corpus& corpus);

// ---------------------------------------------------------------------------
// Label validation.

struct LabeledExample {
  Tweet tweet;
  Category label_ar = Category::Other;
  Category label_mb = Category::Other;
  double match_score = 1.0;
};

using LabeledSet = std::vector<LabeledExample>;

struct RemovedRecord {
  std::size_t record_index = 0;
  std::string tweet_id;
  std::string reason;
};

struct ValidationResult {
  LabeledSet labeled;
  std::vector<RemovedRecord> removed;
};

// Drops records whose labels are not in {1,2,3}; each removal is logged with
// reason "invalid code N".
ValidationResult validate_labels(std::span<const MatchedRecord> matched);

// LABEL file: tweet_id, text, author_id, created_at, label_ar, label_mb, match_score.
void write_labeled_csv(std::ostream& out, std::span<const LabeledExample> labeled);
LabeledSet read_labeled_csv(std::istream& in);
LabeledSet read_labeled_csv(const std::filesystem::path& path);

// Candidates file keeps raw codes so invalid records can be tracked through
// the split step: tweet_id, text, author_id, created_at, label_ar, label_mb, match_score.
void write_matched_csv(std::ostream& out, std::span<const MatchedRecord> matched);

}  // namespace polyframe
