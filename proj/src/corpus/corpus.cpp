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

#include "polyframe/corpus/corpus.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "polyframe/common/csv.hpp"
#include "polyframe/common/error.hpp"
#include "polyframe/common/rng.hpp"
#include "polyframe/common/text.hpp"

namespace polyframe {

using nlohmann::json;

Corpus::Corpus(std::vector<Tweet> tweets) {
  tweets_.reserve(tweets.size());
  for (auto& t : tweets) {
    std::string id = t.id;
    if (!add(std::move(t))) throw DataError("duplicate tweet_id " + id);
  }
}

bool Corpus::add(Tweet tweet) {
  auto [it, inserted] = index_.emplace(tweet.id, tweets_.size());
  if (!inserted) return false;
  tweets_.push_back(std::move(tweet));
  return true;
}

const Tweet* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &tweets_[it->second];
}

std::optional<CorpusFormat> format_from_path(const std::filesystem::path& path) {
  const std::string ext = text::to_lower_ascii(path.extension().string());
  if (ext == ".csv") return CorpusFormat::Csv;
  if (ext == ".jsonl" || ext == ".ndjson") return CorpusFormat::Jsonl;
  return std::nullopt;
}

namespace {

constexpr const char* kCorpusColumns[] = {"tweet_id", "text", "author_id", "created_at"};

bool in_span(const PostDate& d, const IngestOptions& o) {
  const int m = month_ordinal(d.year, d.month == 0 ? 1 : d.month);
  const int lo = month_ordinal(o.earliest.year, o.earliest.month == 0 ? 1 : o.earliest.month);
  const int hi = month_ordinal(o.latest.year, o.latest.month == 0 ? 12 : o.latest.month);
  if (d.month == 0) {
    // Year-only dates are accepted when any month of the year is in span.
    return d.year >= o.earliest.year && d.year <= o.latest.year;
  }
  return m >= lo && m <= hi;
}

// Shared row validation; returns an error message or empty on success.
std::string build_tweet(std::string id, std::string body, std::string author, std::string_view date,
                        const IngestOptions& options, Tweet& out) {
  id = std::string(text::trim(id));
  author = std::string(text::trim(author));
  if (id.empty()) return "missing tweet_id";
  if (author.empty()) return "missing author_id";
  if (text::trim(body).empty()) return "empty text";
  auto parsed = parse_date(date);
  if (!parsed) return fmt::format("unparseable created_at '{}'", date);
  if (!in_span(*parsed, options)) return fmt::format("created_at {} outside corpus span", format_date(*parsed));
  out = Tweet{std::move(id), std::move(body), std::move(author), *parsed};
  return {};
}

std::string json_field_as_string(const json& obj, const char* key, bool& present) {
  present = false;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  present = true;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  if (it->is_number_unsigned()) return std::to_string(it->get<unsigned long long>());
  return it->dump();
}

}  // namespace

IngestResult ingest_corpus(std::istream& in, CorpusFormat format, const IngestOptions& options) {
  IngestResult result;
  auto accept = [&](std::size_t line, Tweet&& t) {
    const std::string id = t.id;
    if (!result.corpus.add(std::move(t))) {
      result.errors.push_back({line, "duplicate tweet_id " + id});
    }
  };

  if (format == CorpusFormat::Csv) {
    csv::Table table(in);
    table.require({kCorpusColumns[0], kCorpusColumns[1], kCorpusColumns[2], kCorpusColumns[3]});
    const std::size_t c_id = *table.column("tweet_id");
    const std::size_t c_text = *table.column("text");
    const std::size_t c_author = *table.column("author_id");
    const std::size_t c_date = *table.column("created_at");
    const std::size_t width = std::max({c_id, c_text, c_author, c_date}) + 1;
    csv::Record rec;
    while (table.next(rec)) {
      if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // blank line
      ++result.rows_read;
      if (rec.fields.size() < width) {
        result.errors.push_back({rec.line, fmt::format("expected at least {} fields, found {}", width,
                                                       rec.fields.size())});
        continue;
      }
      Tweet t;
      auto err = build_tweet(std::move(rec.fields[c_id]), std::move(rec.fields[c_text]),
                             std::move(rec.fields[c_author]), rec.fields[c_date], options, t);
      if (!err.empty()) {
        result.errors.push_back({rec.line, std::move(err)});
        continue;
      }
      accept(rec.line, std::move(t));
    }
    return result;
  }

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    ++result.rows_read;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      result.errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    if (!obj.is_object()) {
      result.errors.push_back({line_no, "record is not a JSON object"});
      continue;
    }
    std::array<std::string, 4> values;
    std::string missing;
    for (std::size_t i = 0; i < 4; ++i) {
      bool present = false;
      values[i] = json_field_as_string(obj, kCorpusColumns[i], present);
      if (!present) missing += (missing.empty() ? "" : ", ") + std::string(kCorpusColumns[i]);
    }
    if (!missing.empty()) {
      result.errors.push_back({line_no, "missing required field(s): " + missing});
      continue;
    }
    Tweet t;
    auto err = build_tweet(std::move(values[0]), std::move(values[1]), std::move(values[2]), values[3], options, t);
    if (!err.empty()) {
      result.errors.push_back({line_no, std::move(err)});
      continue;
    }
    accept(line_no, std::move(t));
  }
  return result;
}

IngestResult ingest_corpus(const std::filesystem::path& path, CorpusFormat format, const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file " + path.string());
  auto result = ingest_corpus(in, format, options);
  spdlog::info("ingested {} of {} rows from {} ({} row errors)", result.corpus.size(), result.rows_read,
               path.string(), result.errors.size());
  return result;
}

void write_corpus_csv(std::ostream& out, std::span<const Tweet> tweets) {
  csv::write_row(out, {"tweet_id", "text", "author_id", "created_at"});
  for (const auto& t : tweets) csv::write_row(out, {t.id, t.text, t.author_id, format_date(t.posted_at)});
}

Corpus filter_language(const Corpus& corpus, std::string_view keep, const LanguageDetector* detector,
                       bool pass_through) {
  if (keep.size() != 2) throw ConfigError(fmt::format("'{}' is not an ISO 639-1 language code", keep));
  if (detector == nullptr) {
    if (pass_through) return corpus;
    throw ConfigError(
        "language filtering requested but no language detector is configured; "
        "either plug in a detector or run in pass-through mode");
  }
  std::vector<Tweet> kept;
  for (const auto& t : corpus.tweets()) {
    if (detector->detect(t.text) == keep) kept.push_back(t);
  }
  return Corpus(std::move(kept));
}

// ---------------------------------------------------------------------------

namespace {

int parse_code(const std::string& s, std::size_t line, const char* column) {
  const auto trimmed = text::trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
  if (ec != std::errc() || ptr != trimmed.data() + trimmed.size()) {
    throw DataError(fmt::format("line {}: {} '{}' is not an integer", line, column, s));
  }
  return v;
}

}  // namespace

std::vector<RawLabeledRecord> read_raw_labeled(std::istream& in) {
  csv::Table table(in);
  table.require({"text", "label_ar", "label_mb", "year"});
  const std::size_t c_text = *table.column("text");
  const std::size_t c_ar = *table.column("label_ar");
  const std::size_t c_mb = *table.column("label_mb");
  const std::size_t c_year = *table.column("year");
  std::vector<RawLabeledRecord> out;
  csv::Record rec;
  while (table.next(rec)) {
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    if (rec.fields.size() < table.header().size()) {
      throw DataError(fmt::format("line {}: expected {} fields, found {}", rec.line, table.header().size(),
                                  rec.fields.size()));
    }
    RawLabeledRecord r;
    r.text = rec.fields[c_text];
    r.label_ar = parse_code(rec.fields[c_ar], rec.line, "label_ar");
    r.label_mb = parse_code(rec.fields[c_mb], rec.line, "label_mb");
    r.source_year = text::trim(rec.fields[c_year]).empty() ? 0 : parse_code(rec.fields[c_year], rec.line, "year");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RawLabeledRecord> read_raw_labeled(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read labeled file " + path.string());
  return read_raw_labeled(in);
}

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), curr(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

std::size_t bounded_edit_distance(std::u32string_view a, std::u32string_view b, std::size_t max_distance) {
  // Common prefix and suffix do not change the distance.
  while (!a.empty() && !b.empty() && a.front() == b.front()) a.remove_prefix(1), b.remove_prefix(1);
  while (!a.empty() && !b.empty() && a.back() == b.back()) a.remove_suffix(1), b.remove_suffix(1);
  if (a.size() < b.size()) std::swap(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n - m > max_distance) return max_distance + 1;
  if (m == 0) return n;

  // Ukkonen band: only cells with |i - j| <= max_distance can stay within bound.
  const std::size_t kInf = max_distance + 1;
  std::vector<std::size_t> prev(m + 1, kInf), curr(m + 1, kInf);
  for (std::size_t j = 0; j <= std::min(m, max_distance); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t lo = i > max_distance ? i - max_distance : 0;
    const std::size_t hi = std::min(m, i + max_distance);
    if (lo >= 1) curr[lo - 1] = kInf;
    if (hi + 1 <= m) curr[hi + 1] = kInf;
    std::size_t row_min = kInf;
    if (lo == 0) {
      curr[0] = i <= max_distance ? i : kInf;
      row_min = curr[0];
    }
    for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      const std::size_t v = std::min({prev[j] + 1, curr[j - 1] + 1, sub, kInf});
      curr[j] = v;
      row_min = std::min(row_min, v);
    }
    if (row_min > max_distance) return kInf;
    std::swap(prev, curr);
  }
  return std::min(prev[m], kInf);
}

double similarity_normalized(std::u32string_view a, std::u32string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

double similarity(std::string_view a, std::string_view b) {
  return similarity_normalized(text::normalize_for_match(a), text::normalize_for_match(b));
}

namespace {

constexpr std::size_t kBins = 64;
using Histogram = std::array<std::uint8_t, kBins>;

Histogram histogram_of(std::u32string_view s) {
  Histogram h{};
  for (char32_t c : s) {
    auto& slot = h[c % kBins];
    if (slot < 255) ++slot;
  }
  return h;
}

// Lower bound on the edit distance from character-count differences.
std::size_t histogram_bound(const Histogram& a, const Histogram& b) {
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < kBins; ++i) {
    if (a[i] > b[i]) pos += a[i] - b[i];
    else neg += b[i] - a[i];
  }
  return std::max(pos, neg);
}

struct CorpusIndex {
  std::vector<std::string> normalized;  // UTF-8 of the normalized text
  std::vector<std::uint32_t> length;    // in code points
  std::vector<Histogram> hist;
  std::unordered_multimap<std::uint64_t, std::size_t> exact;
  std::map<int, std::vector<std::size_t>> by_year;
  std::vector<std::size_t> all;
};

CorpusIndex build_index(const Corpus& corpus) {
  CorpusIndex ix;
  const std::size_t n = corpus.size();
  ix.normalized.resize(n);
  ix.length.resize(n);
  ix.hist.resize(n);
  ix.all.resize(n);
  ix.exact.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto norm = text::normalize_for_match(corpus[i].text);
    ix.normalized[i] = text::encode_utf8(norm);
    ix.length[i] = static_cast<std::uint32_t>(norm.size());
    ix.hist[i] = histogram_of(norm);
    ix.exact.emplace(fnv1a64(ix.normalized[i]), i);
    ix.by_year[corpus[i].posted_at.year].push_back(i);
    ix.all[i] = i;
  }
  return ix;
}

enum class Outcome { Matched, Review, Discarded };

struct RecordResult {
  Outcome outcome = Outcome::Discarded;
  double score = 0.0;
  std::vector<std::size_t> candidates;
};

RecordResult match_one(const RawLabeledRecord& rec, const CorpusIndex& ix, const RestoreOptions& opt) {
  RecordResult res;
  const std::u32string norm = text::normalize_for_match(rec.text);
  const std::string norm_utf8 = text::encode_utf8(norm);

  auto [lo, hi] = ix.exact.equal_range(fnv1a64(norm_utf8));
  for (auto it = lo; it != hi; ++it) {
    if (ix.normalized[it->second] == norm_utf8) res.candidates.push_back(it->second);
  }
  if (!res.candidates.empty()) {
    std::sort(res.candidates.begin(), res.candidates.end());
    res.score = 1.0;
    res.outcome = res.candidates.size() == 1 ? Outcome::Matched : Outcome::Review;
    return res;
  }

  const std::vector<std::size_t>* scope = &ix.all;
  if (opt.same_year_only && rec.source_year != 0) {
    auto it = ix.by_year.find(rec.source_year);
    static const std::vector<std::size_t> kEmpty;
    scope = it == ix.by_year.end() ? &kEmpty : &it->second;
  }

  const Histogram h = histogram_of(norm);
  const std::size_t len = norm.size();
  double best = -1.0;
  for (std::size_t idx : *scope) {
    const double cutoff = std::max(opt.threshold, best);
    const std::size_t clen = ix.length[idx];
    const std::size_t longest = std::max(len, clen);
    if (longest == 0) continue;
    const double lf = static_cast<double>(longest);
    // Largest distance whose score still reaches the cutoff.
    const double slack = (1.0 - cutoff) * lf + 1e-9;
    if (slack < 0.0) continue;
    const auto max_d = static_cast<std::size_t>(std::floor(slack));
    const std::size_t len_gap = len > clen ? len - clen : clen - len;
    if (len_gap > max_d) continue;
    if (histogram_bound(h, ix.hist[idx]) > max_d) continue;
    const std::u32string cand = text::decode_utf8(ix.normalized[idx]);
    const std::size_t d = bounded_edit_distance(norm, cand, max_d);
    if (d > max_d) continue;
    const double score = 1.0 - static_cast<double>(d) / lf;
    if (score < cutoff) continue;
    if (score > best) {
      best = score;
      res.candidates.assign(1, idx);
    } else if (score == best) {
      res.candidates.push_back(idx);
    }
  }
  if (res.candidates.empty()) {
    res.outcome = Outcome::Discarded;
    return res;
  }
  res.score = best;
  res.outcome = Outcome::Review;
  return res;
}

}  // namespace

RestoreResult restore_ids(std::span<const RawLabeledRecord> raw, const Corpus& corpus, const RestoreOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold <= 1.0)) {
    throw ConfigError(fmt::format("match threshold {} must be in (0, 1]", options.threshold));
  }
  if (corpus.empty()) throw DataError("cannot restore ids against an empty corpus");

  const CorpusIndex ix = build_index(corpus);
  std::vector<RecordResult> results(raw.size());
  std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(raw.size(), 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < raw.size(); i = next++) results[i] = match_one(raw[i], ix, options);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  RestoreResult out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& r = results[i];
    switch (r.outcome) {
      case Outcome::Matched:
        out.matched.push_back({i, raw[i], corpus[r.candidates.front()], r.score});
        break;
      case Outcome::Review: {
        ReviewItem item{i, r.score, {}};
        for (std::size_t c : r.candidates) item.candidates.push_back({corpus[c].id, r.score});
        out.review_queue.push_back(std::move(item));
        break;
      }
      case Outcome::Discarded:
        out.discarded.push_back({i, std::nullopt});
        break;
    }
  }
  spdlog::info("restore_ids: {} matched, {} for review, {} discarded", out.matched.size(), out.review_queue.size(),
               out.discarded.size());
  return out;
}

namespace {

std::string_view decision_name(ReviewDecision d) {
  switch (d) {
    case ReviewDecision::Accept:
      return "accept";
    case ReviewDecision::Reject:
      return "reject";
    case ReviewDecision::Pending:
      break;
  }
  return "pending";
}

}  // namespace

void write_review_manifest(std::ostream& out, std::span<const ReviewItem> queue) {
  for (const auto& item : queue) {
    for (const auto& c : item.candidates) {
      json j{{"record_index", item.record_index},
             {"candidate_tweet_id", c.tweet_id},
             {"score", c.score},
             {"decision", std::string(decision_name(ReviewDecision::Pending))}};
      out << j.dump() << '\n';
    }
  }
}

std::vector<ReviewManifestEntry> read_review_manifest(std::istream& in) {
  std::vector<ReviewManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      ReviewManifestEntry e;
      e.record_index = j.at("record_index").get<std::size_t>();
      e.candidate_tweet_id = j.at("candidate_tweet_id").get<std::string>();
      e.score = j.at("score").get<double>();
      const std::string d = text::to_lower_ascii(j.at("decision").get<std::string>());
      if (d == "accept") e.decision = ReviewDecision::Accept;
      else if (d == "reject") e.decision = ReviewDecision::Reject;
      else if (d == "pending") e.decision = ReviewDecision::Pending;
      else throw DataError("unknown decision '" + d + "'");
      out.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("review manifest line {}: {}", line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("review manifest line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

ReviewOutcome apply_review(std::span<const ReviewItem> queue, std::span<const RawLabeledRecord> raw,
                           const Corpus& corpus, std::span<const ReviewManifestEntry> entries) {
  std::map<std::size_t, std::vector<const ReviewManifestEntry*>> by_record;
  for (const auto& e : entries) by_record[e.record_index].push_back(&e);

  ReviewOutcome out;
  for (const auto& item : queue) {
    const ReviewManifestEntry* accepted = nullptr;
    bool any_reject = false;
    for (const auto* e : by_record[item.record_index]) {
      const bool known = std::any_of(item.candidates.begin(), item.candidates.end(),
                                     [&](const MatchCandidate& c) { return c.tweet_id == e->candidate_tweet_id; });
      if (!known) {
        throw DataError(fmt::format("review decision for record {} names unknown candidate {}", item.record_index,
                                    e->candidate_tweet_id));
      }
      if (e->decision == ReviewDecision::Accept) {
        if (accepted && accepted->candidate_tweet_id != e->candidate_tweet_id) {
          throw DataError(fmt::format("record {} has more than one accepted candidate", item.record_index));
        }
        accepted = e;
      } else if (e->decision == ReviewDecision::Reject) {
        any_reject = true;
      }
    }
    if (accepted) {
      const Tweet* t = corpus.find(accepted->candidate_tweet_id);
      if (!t) throw DataError("accepted candidate " + accepted->candidate_tweet_id + " is not in the corpus");
      out.accepted.push_back({item.record_index, raw[item.record_index], *t, item.score});
    } else if (any_reject) {
      ++out.rejected;
    } else {
      out.pending.push_back(item);
    }
  }
  return out;
}

ReviewOutcome accept_all_review(std::span<const ReviewItem> queue, std::span<const RawLabeledRecord> raw,
                                const Corpus& corpus) {
  ReviewOutcome out;
  for (const auto& item : queue) {
    if (item.candidates.size() != 1) {
      out.pending.push_back(item);
      continue;
    }
    const Tweet* t = corpus.find(item.candidates.front().tweet_id);
    out.accepted.push_back({item.record_index, raw[item.record_index], *t, item.score});
  }
  return out;
}

ValidationResult validate_labels(std::span<const MatchedRecord> matched) {
  ValidationResult out;
  for (const auto& m : matched) {
    const auto ar = category_from_code(m.raw.label_ar);
    const auto mb = category_from_code(m.raw.label_mb);
    if (!ar || !mb) {
      const int bad = ar ? m.raw.label_mb : m.raw.label_ar;
      RemovedRecord r{m.record_index, m.tweet.id, fmt::format("invalid code {}", bad)};
      spdlog::warn("removing record {} (tweet {}): {}", r.record_index, r.tweet_id, r.reason);
      out.removed.push_back(std::move(r));
      continue;
    }
    out.labeled.push_back({m.tweet, *ar, *mb, m.score});
  }
  return out;
}

void write_labeled_csv(std::ostream& out, std::span<const LabeledExample> labeled) {
  csv::write_row(out, {"tweet_id", "text", "author_id", "created_at", "label_ar", "label_mb", "match_score"});
  for (const auto& e : labeled) {
    csv::write_row(out, {e.tweet.id, e.tweet.text, e.tweet.author_id, format_date(e.tweet.posted_at),
                         std::to_string(code_of(e.label_ar)), std::to_string(code_of(e.label_mb)),
                         fmt::format("{}", e.match_score)});
  }
}

void write_matched_csv(std::ostream& out, std::span<const MatchedRecord> matched) {
  csv::write_row(out, {"tweet_id", "text", "author_id", "created_at", "label_ar", "label_mb", "match_score"});
  for (const auto& m : matched) {
    csv::write_row(out, {m.tweet.id, m.tweet.text, m.tweet.author_id, format_date(m.tweet.posted_at),
                         std::to_string(m.raw.label_ar), std::to_string(m.raw.label_mb),
                         fmt::format("{}", m.score)});
  }
}

LabeledSet read_labeled_csv(std::istream& in) {
  csv::Table table(in);
  table.require({"tweet_id", "text", "author_id", "created_at", "label_ar", "label_mb"});
  const std::size_t c_id = *table.column("tweet_id");
  const std::size_t c_text = *table.column("text");
  const std::size_t c_author = *table.column("author_id");
  const std::size_t c_date = *table.column("created_at");
  const std::size_t c_ar = *table.column("label_ar");
  const std::size_t c_mb = *table.column("label_mb");
  const auto c_score = table.column("match_score");
  LabeledSet out;
  std::set<std::string> seen;
  csv::Record rec;
  while (table.next(rec)) {
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    if (rec.fields.size() < table.header().size()) {
      throw DataError(fmt::format("line {}: expected {} fields", rec.line, table.header().size()));
    }
    LabeledExample e;
    e.tweet.id = rec.fields[c_id];
    e.tweet.text = rec.fields[c_text];
    e.tweet.author_id = rec.fields[c_author];
    auto date = parse_date(rec.fields[c_date]);
    if (!date) throw DataError(fmt::format("line {}: unparseable created_at '{}'", rec.line, rec.fields[c_date]));
    e.tweet.posted_at = *date;
    auto ar = category_from_code(parse_code(rec.fields[c_ar], rec.line, "label_ar"));
    auto mb = category_from_code(parse_code(rec.fields[c_mb], rec.line, "label_mb"));
    if (!ar || !mb) throw DataError(fmt::format("line {}: label outside {{1,2,3}}", rec.line));
    e.label_ar = *ar;
    e.label_mb = *mb;
    if (c_score && !rec.fields[*c_score].empty()) e.match_score = std::stod(rec.fields[*c_score]);
    if (!seen.insert(e.tweet.id).second) throw DataError(fmt::format("line {}: duplicate tweet_id {}", rec.line, e.tweet.id));
    out.push_back(std::move(e));
  }
  return out;
}

LabeledSet read_labeled_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return read_labeled_csv(in);
}

}  // namespace polyframe
