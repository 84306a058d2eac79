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
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace polyframe {

enum class TokenizerKind { WordPiece, FastBpe };

std::string_view to_string(TokenizerKind kind);
TokenizerKind tokenizer_kind_from_string(std::string_view s);  // throws ConfigError

// Ordered token list; the id of a token is its line number.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  // One token per line. Throws DataError on an unreadable file or a repeat.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  // -1 when absent.
  std::int32_t find(std::string_view token) const;
  // Throws DataError naming the token when absent.
  std::int32_t require(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  // Subword pieces of `text` without special tokens.
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;

  // Start token, pieces, end token; pieces truncated so the result fits in
  // `max_length` (at least 2).
  std::vector<std::int32_t> encode(std::string_view text, std::size_t max_length) const;

  const Vocabulary& vocab() const { return vocab_; }
  std::int32_t start_id() const { return start_id_; }
  std::int32_t end_id() const { return end_id_; }
  std::int32_t unk_id() const { return unk_id_; }
  std::int32_t pad_id() const { return pad_id_; }

 protected:
  Tokenizer(Vocabulary vocab, std::string_view start, std::string_view end, std::string_view unk,
            std::string_view pad);

  Vocabulary vocab_;
  std::int32_t start_id_ = 0;
  std::int32_t end_id_ = 0;
  std::int32_t unk_id_ = 0;
  std::int32_t pad_id_ = 0;
};

// BERT-style basic tokenization (whitespace and punctuation splitting,
// optional lowercasing with accent stripping) followed by greedy
// longest-match-first WordPiece with "##" continuations.
class WordPieceTokenizer final : public Tokenizer {
 public:
  WordPieceTokenizer(Vocabulary vocab, bool lowercase);

  std::vector<std::string> tokenize(std::string_view text) const override;
  std::vector<std::string> basic_tokenize(std::string_view text) const;

 private:
  bool lowercase_;
};

// Subword-nmt / fastBPE merges with "@@" continuation markers, as used by
// tweet-pretrained RoBERTa models. With `normalize` set, user mentions become
// "@USER", links become "HTTPURL" and the text is split tweet-style first.
class FastBpeTokenizer final : public Tokenizer {
 public:
  // Each merge is a pair of symbols; earlier merges have higher priority.
  FastBpeTokenizer(Vocabulary vocab, std::vector<std::pair<std::string, std::string>> merges, bool normalize);

  // Reads "left right [count]" lines.
  static std::vector<std::pair<std::string, std::string>> load_merges(const std::filesystem::path& path);

  std::vector<std::string> tokenize(std::string_view text) const override;
  std::vector<std::string> bpe(std::string_view word) const;

 private:
  std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
  bool normalize_;
};

// Tweet normalization applied before BPE: mention/link replacement,
// typographic quote and ellipsis folding, contraction splitting.
std::string normalize_tweet(std::string_view text);

// Tweet-style pre-tokenization: links, mentions, hashtags, words (with inner
// apostrophes/hyphens), numbers, punctuation runs and single symbols.
std::vector<std::string> tweet_pretokenize(std::string_view text);

// Builds a WordPiece vocabulary from `texts`: specials, every character seen
// (plain and "##" forms) and the most frequent whole words up to `max_size`.
Vocabulary build_wordpiece_vocab(const std::vector<std::string>& texts, std::size_t max_size, bool lowercase);

}  // namespace polyframe
