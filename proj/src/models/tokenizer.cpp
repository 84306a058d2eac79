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

#include "polyframe/models/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "polyframe/common/error.hpp"
#include "polyframe/common/text.hpp"

namespace polyframe {

std::string_view to_string(TokenizerKind kind) { return kind == TokenizerKind::WordPiece ? "wordpiece" : "fastbpe"; }

TokenizerKind tokenizer_kind_from_string(std::string_view s) {
  if (s == "wordpiece") return TokenizerKind::WordPiece;
  if (s == "fastbpe") return TokenizerKind::FastBpe;
  throw ConfigError(fmt::format("unknown tokenizer kind '{}'", s));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw DataError(fmt::format("vocabulary token '{}' repeated at id {}", tokens_[i], i));
    }
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read vocabulary {}", path.string()));
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write vocabulary {}", path.string()));
  for (const auto& t : tokens_) out << t << '\n';
}

std::int32_t Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? -1 : it->second;
}

std::int32_t Vocabulary::require(std::string_view token) const {
  const auto id = find(token);
  if (id < 0) throw DataError(fmt::format("vocabulary lacks special token '{}'", token));
  return id;
}

Tokenizer::Tokenizer(Vocabulary vocab, std::string_view start, std::string_view end, std::string_view unk,
                     std::string_view pad)
    : vocab_(std::move(vocab)),
      start_id_(vocab_.require(start)),
      end_id_(vocab_.require(end)),
      unk_id_(vocab_.require(unk)),
      pad_id_(vocab_.require(pad)) {}

std::vector<std::int32_t> Tokenizer::encode(std::string_view text, std::size_t max_length) const {
  if (max_length < 2) throw ConfigError("max sequence length must be at least 2");
  const auto pieces = tokenize(text);
  const std::size_t keep = std::min(pieces.size(), max_length - 2);
  std::vector<std::int32_t> ids;
  ids.reserve(keep + 2);
  ids.push_back(start_id_);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto id = vocab_.find(pieces[i]);
    ids.push_back(id < 0 ? unk_id_ : id);
  }
  ids.push_back(end_id_);
  return ids;
}

namespace {

bool is_control(char32_t c) {
  if (c == U'\t' || c == U'\n' || c == U'\r') return false;
  return c < 0x20 || (c >= 0x7F && c < 0xA0) || c == 0xAD || (c >= 0x200B && c <= 0x200F) ||
         (c >= 0x202A && c <= 0x202E) || (c >= 0x2060 && c <= 0x2064) || c == 0xFEFF;
}

bool is_punctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126)) return true;
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF: case 0x37E: case 0x387:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011) || (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20);
}

bool is_cjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2A6DF) ||
         (c >= 0x2A700 && c <= 0x2CEAF) || (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

bool is_combining_mark(char32_t c) { return c >= 0x300 && c <= 0x36F; }

// Base letter of a precomposed Latin-1 letter, or the letter itself.
char32_t strip_accent(char32_t c) {
  static constexpr char kLatin1[] =
      "AAAAAA\0CEEEEIIII\0NOOOOO\0\0UUUUY\0\0aaaaaa\0ceeeeiiii\0nooooo\0\0uuuuy\0y";
  if (c >= 0xC0 && c <= 0xFF) {
    const char b = kLatin1[c - 0xC0];
    return b == '\0' ? c : static_cast<char32_t>(b);
  }
  return c;
}

std::vector<std::u32string> basic_split(std::string_view text, bool lowercase) {
  std::u32string cleaned;
  for (char32_t c : text::decode_utf8(text)) {
    if (c == 0 || c == 0xFFFD || is_control(c)) continue;
    if (text::is_space(c)) {
      cleaned.push_back(U' ');
    } else if (is_cjk(c)) {
      cleaned += U' ';
      cleaned.push_back(c);
      cleaned += U' ';
    } else {
      cleaned.push_back(c);
    }
  }
  std::vector<std::u32string> out;
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char32_t c : cleaned) {
    if (c == U' ') {
      flush();
      continue;
    }
    if (lowercase) {
      if (is_combining_mark(c)) continue;
      c = strip_accent(text::fold_case(c));
    }
    if (is_punctuation(c)) {
      flush();
      out.push_back(std::u32string(1, c));
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(Vocabulary vocab, bool lowercase)
    : Tokenizer(std::move(vocab), "[CLS]", "[SEP]", "[UNK]", "[PAD]"), lowercase_(lowercase) {}

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& w : basic_split(text, lowercase_)) out.push_back(text::encode_utf8(w));
  return out;
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view text) const {
  constexpr std::size_t kMaxWordChars = 100;
  std::vector<std::string> out;
  for (const auto& word : basic_split(text, lowercase_)) {
    if (word.size() > kMaxWordChars) {
      out.push_back("[UNK]");
      continue;
    }
    std::vector<std::string> pieces;
    std::size_t start = 0;
    bool bad = false;
    while (start < word.size()) {
      std::size_t end = word.size();
      std::string found;
      while (start < end) {
        std::string piece = text::encode_utf8(std::u32string_view(word).substr(start, end - start));
        if (start > 0) piece = "##" + piece;
        if (vocab_.find(piece) >= 0) {
          found = std::move(piece);
          break;
        }
        --end;
      }
      if (found.empty()) {
        bad = true;
        break;
      }
      pieces.push_back(std::move(found));
      start = end;
    }
    if (bad) {
      out.push_back("[UNK]");
    } else {
      out.insert(out.end(), pieces.begin(), pieces.end());
    }
  }
  return out;
}

FastBpeTokenizer::FastBpeTokenizer(Vocabulary vocab, std::vector<std::pair<std::string, std::string>> merges,
                                   bool normalize)
    : Tokenizer(std::move(vocab), "<s>", "</s>", "<unk>", "<pad>"), normalize_(normalize) {
  for (std::size_t i = 0; i < merges.size(); ++i) ranks_.emplace(std::move(merges[i]), i);
}

std::vector<std::pair<std::string, std::string>> FastBpeTokenizer::load_merges(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read merges {}", path.string()));
  std::vector<std::pair<std::string, std::string>> merges;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.starts_with("#version")) continue;
    std::vector<std::string> parts;
    for (auto& p : text::split(line, ' ')) {
      if (!p.empty()) parts.push_back(std::move(p));
    }
    if (parts.size() < 2) throw DataError(fmt::format("{}:{}: malformed merge line", path.string(), n));
    merges.emplace_back(parts[0], parts[1]);
  }
  return merges;
}

std::vector<std::string> FastBpeTokenizer::bpe(std::string_view token) const {
  const auto cps = text::decode_utf8(token);
  if (cps.empty()) return {};
  std::vector<std::string> word;
  for (std::size_t i = 0; i < cps.size(); ++i) word.push_back(text::encode_utf8(std::u32string_view(&cps[i], 1)));
  if (word.size() == 1) return {std::string(token)};
  word.back() += "</w>";

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  while (word.size() > 1) {
    std::size_t best = kNone;
    std::pair<std::string, std::string> best_pair;
    for (std::size_t i = 0; i + 1 < word.size(); ++i) {
      auto it = ranks_.find({word[i], word[i + 1]});
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        best_pair = it->first;
      }
    }
    if (best == kNone) break;
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < word.size();) {
      if (i + 1 < word.size() && word[i] == best_pair.first && word[i + 1] == best_pair.second) {
        merged.push_back(word[i] + word[i + 1]);
        i += 2;
      } else {
        merged.push_back(word[i]);
        ++i;
      }
    }
    word = std::move(merged);
  }
  for (std::size_t i = 0; i + 1 < word.size(); ++i) word[i] += "@@";
  auto& last = word.back();
  last.resize(last.size() - 4);  // drop "</w>"
  return word;
}

std::vector<std::string> FastBpeTokenizer::tokenize(std::string_view text) const {
  const std::string prepared = normalize_ ? normalize_tweet(text) : std::string(text);
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    for (auto& p : bpe(current)) out.push_back(std::move(p));
    current.clear();
  };
  for (char ch : prepared) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v') {
      flush();
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return out;
}

namespace {

bool is_word_char(char32_t c) {
  if (c < 0x80) return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9') || c == U'_';
  return !text::is_space(c) && !is_punctuation(c) && !is_control(c) && (c < 0x2190 || (c >= 0x3040 && c < 0x1F000));
}

bool starts_link(std::u32string_view s, std::size_t i) {
  auto rest = text::encode_utf8(s.substr(i, 8));
  return text::starts_with_ci(rest, "http://") || text::starts_with_ci(rest, "https://") ||
         text::starts_with_ci(rest, "www.");
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::vector<std::string> tweet_pretokenize(std::string_view input) {
  const auto s = text::decode_utf8(input);
  std::vector<std::string> out;
  std::size_t i = 0;
  auto emit = [&](std::size_t b, std::size_t e) { out.push_back(text::encode_utf8(std::u32string_view(s).substr(b, e - b))); };
  while (i < s.size()) {
    const char32_t c = s[i];
    if (text::is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t b = i;
    if (starts_link(s, i)) {
      while (i < s.size() && !text::is_space(s[i])) ++i;
    } else if ((c == U'@' || c == U'#') && i + 1 < s.size() && is_word_char(s[i + 1])) {
      ++i;
      while (i < s.size() && is_word_char(s[i])) ++i;
    } else if (is_word_char(c)) {
      while (i < s.size()) {
        if (is_word_char(s[i])) {
          ++i;
        } else if ((s[i] == U'\'' || s[i] == U'-' || s[i] == 0x2019) && i + 1 < s.size() && is_word_char(s[i + 1])) {
          i += 2;
        } else {
          break;
        }
      }
    } else if (c == U'.') {
      while (i < s.size() && s[i] == U'.') ++i;
    } else {
      ++i;
    }
    emit(b, i);
  }
  return out;
}

std::string normalize_tweet(std::string_view input) {
  std::string prepared(input);
  replace_all(prepared, "’", "'");
  replace_all(prepared, "…", "...");
  std::string joined;
  for (const auto& token : tweet_pretokenize(prepared)) {
    std::string norm;
    if (token.starts_with("@")) {
      norm = "@USER";
    } else if (text::starts_with_ci(token, "http") || text::starts_with_ci(token, "www")) {
      norm = "HTTPURL";
    } else {
      norm = token;
    }
    if (!joined.empty()) joined += ' ';
    joined += norm;
  }
  // Trailing space so suffix rules also fire on the last token.
  joined += ' ';
  replace_all(joined, "cannot ", "can not ");
  replace_all(joined, "n't ", " n't ");
  replace_all(joined, "n 't ", " n't ");
  replace_all(joined, "ca n't", "can't");
  replace_all(joined, "ai n't", "ain't");
  for (std::string_view suffix : {"'m ", "'re ", "'s ", "'ll ", "'d ", "'ve "}) {
    replace_all(joined, suffix, fmt::format(" {}", suffix));
  }
  replace_all(joined, " p . m .", "  p.m.");
  replace_all(joined, " p . m ", " p.m ");
  replace_all(joined, " a . m .", " a.m.");
  replace_all(joined, " a . m ", " a.m ");
  std::string out;
  for (const auto& part : text::split(joined, ' ')) {
    if (part.empty()) continue;
    if (!out.empty()) out += ' ';
    out += part;
  }
  return out;
}

Vocabulary build_wordpiece_vocab(const std::vector<std::string>& texts, std::size_t max_size, bool lowercase) {
  std::vector<std::string> tokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  std::map<std::u32string, std::size_t> word_counts;
  std::map<char32_t, std::size_t> chars;
  for (const auto& t : texts) {
    for (auto& w : basic_split(t, lowercase)) {
      for (char32_t c : w) chars[c] += 1;
      word_counts[w] += 1;
    }
  }
  for (const auto& [c, n] : chars) tokens.push_back(text::encode_utf8(std::u32string(1, c)));
  for (const auto& [c, n] : chars) tokens.push_back("##" + text::encode_utf8(std::u32string(1, c)));
  std::vector<std::pair<std::u32string, std::size_t>> words;
  for (const auto& [w, n] : word_counts) {
    if (w.size() > 1) words.emplace_back(w, n);
  }
  std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [w, n] : words) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(text::encode_utf8(w));
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace polyframe
