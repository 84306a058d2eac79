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

#include "polyframe/llm/llm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "polyframe/common/csv.hpp"
#include "polyframe/common/hash.hpp"
#include "polyframe/metrics/metrics.hpp"

namespace polyframe {

namespace {

constexpr std::string_view kSlot = "[tweet text]";

std::string join_lines(std::initializer_list<std::string_view> lines) {
  std::string out;
  for (auto l : lines) {
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

constexpr std::string_view kClassifyIntro =
    "Based on Kingdon's theory, please classify this tweet into one of these categories:";
constexpr std::string_view kProblemLine =
    "1. Problem Oriented - The tweet describes or mentions a problem, issue, or challenge";
constexpr std::string_view kSolutionLine =
    "2. Solution Oriented - The tweet describes or mentions a solution, fix, or resolution";
// The published variants differ in a trailing space on this line.
constexpr std::string_view kSolutionLineSp =
    "2. Solution Oriented - The tweet describes or mentions a solution, fix, or resolution ";
constexpr std::string_view kPoliticalLine =
    "3. Political - The tweet is political in nature but doesn't clearly focus on problems or solutions";
constexpr std::string_view kTweetLine = "Tweet: [tweet text]";

const std::string& direct_with_explanation() {
  static const std::string s = join_lines(
      {kClassifyIntro, kProblemLine, kSolutionLine, kPoliticalLine,
       "Respond with ONLY the number (1, 2, or 3) corresponding to the category, followed by a brief explanation.",
       "Format your response as: NUMBER [explanation]",
       "For example: 1 [This tweet focuses on describing a problem with healthcare costs]", kTweetLine});
  return s;
}

const std::string& direct_no_explanation() {
  static const std::string s =
      join_lines({kClassifyIntro, kProblemLine, kSolutionLineSp, kPoliticalLine,
                  "Respond with ONLY the number (1, 2, or 3) corresponding to the category.", kTweetLine});
  return s;
}

std::string confidence_prompt(std::string_view format_line, std::string_view example_line) {
  return join_lines({"Based on Kingdon's theory, please provide confidence scores for this tweet.",
                     "Classify this tweet into these categories:", kProblemLine, kSolutionLineSp,
                     "For this tweet, please provide:",
                     "- Confidence score for Class 1 (Problem) as a percentage (0-100)",
                     "- Confidence score for Class 2 (Solution) as a percentage (0-100)",
                     "Note: The sum of both confidence scores should not exceed 100", format_line, example_line,
                     kTweetLine});
}

const std::string& confidence_with_explanation() {
  static const std::string s = confidence_prompt("Format your response as: CONF1,CONF2 [explanation]",
                                                 "For example: 85,10 Political discussion with some problem elements");
  return s;
}

const std::string& confidence_no_explanation() {
  static const std::string s = confidence_prompt("Format your response as: CONF1,CONF2", "For example: 85,10");
  return s;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_opening_mark(char c) {
  return c == '[' || c == '(' || c == '"' || c == '\'' || c == '*' || c == '`' || c == '{';
}

bool is_closing_mark(char c) {
  return c == ']' || c == ')' || c == '"' || c == '\'' || c == '*' || c == '`' || c == '}' || c == '.' ||
         c == ':' || c == ',' || c == ';' || c == '-' || c == '|';
}

void skip_opening(std::string_view& s) {
  while (!s.empty() && (is_space(s.front()) || is_opening_mark(s.front()))) s.remove_prefix(1);
}

bool starts_with_word(std::string_view s, std::string_view word) {
  if (s.size() < word.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != word[i]) return false;
  }
  return s.size() == word.size() || !is_alpha(s[word.size()]);
}

std::optional<std::string> explanation_of(std::string_view rest) {
  while (!rest.empty() && (is_space(rest.front()) || is_closing_mark(rest.front()))) rest.remove_prefix(1);
  rest = trim(rest);
  if (rest.size() >= 2 && ((rest.front() == '[' && rest.back() == ']') || (rest.front() == '(' && rest.back() == ')'))) {
    rest = trim(rest.substr(1, rest.size() - 2));
  }
  if (rest.empty()) return std::nullopt;
  return std::string(rest);
}

// Non-negative decimal with optional fraction and '%'. Advances `s`.
std::optional<double> take_number(std::string_view& s, std::string& error) {
  std::size_t i = 0;
  while (i < s.size() && is_digit(s[i])) ++i;
  if (i == 0) {
    error = "expected a number";
    return std::nullopt;
  }
  if (i < s.size() && s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1])) {
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i;
  }
  if (i < s.size() && is_alpha(s[i])) {
    error = fmt::format("malformed number '{}'", s.substr(0, i + 1));
    return std::nullopt;
  }
  double v = std::strtod(std::string(s.substr(0, i)).c_str(), nullptr);
  s.remove_prefix(i);
  if (!s.empty() && s.front() == '%') s.remove_prefix(1);
  return v;
}

}  // namespace

std::string PromptSpec::name() const {
  return fmt::format("{}_{}", mode == PromptMode::Direct ? "direct" : "confidence",
                     with_explanation ? "with_explanation" : "no_explanation");
}

std::string_view prompt_template(const PromptSpec& spec) {
  if (spec.mode == PromptMode::Direct) {
    return spec.with_explanation ? direct_with_explanation() : direct_no_explanation();
  }
  return spec.with_explanation ? confidence_with_explanation() : confidence_no_explanation();
}

std::string build_prompt(const PromptSpec& spec, std::string_view tweet_text) {
  if (trim(tweet_text).empty()) throw DataError("cannot build a prompt for an empty tweet");
  std::string out(prompt_template(spec));
  auto pos = out.rfind(kSlot);
  out.replace(pos, kSlot.size(), tweet_text);
  return out;
}

std::variant<DirectAnswer, ParseFailure> parse_direct(std::string_view raw) {
  std::string_view s = trim(raw);
  if (s.empty()) return ParseFailure{"empty response"};
  skip_opening(s);
  for (std::string_view word : {"class", "category", "answer"}) {
    if (starts_with_word(s, word)) {
      s.remove_prefix(word.size());
      while (!s.empty() && (is_space(s.front()) || s.front() == ':' || s.front() == '#')) s.remove_prefix(1);
      break;
    }
  }
  std::size_t i = 0;
  while (i < s.size() && is_digit(s[i])) ++i;
  if (i == 0) return ParseFailure{fmt::format("no leading class number in '{}'", raw.substr(0, 40))};
  if (i < s.size() && (is_alpha(s[i]) || (s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1])))) {
    return ParseFailure{fmt::format("malformed class number in '{}'", raw.substr(0, 40))};
  }
  std::string_view digits = s.substr(0, i);
  if (digits.size() != 1 || digits[0] < '1' || digits[0] > '3') {
    return ParseFailure{fmt::format("class number {} outside 1-3", digits)};
  }
  DirectAnswer out;
  out.label = *category_from_code(digits[0] - '0');
  out.explanation = explanation_of(s.substr(i));
  return out;
}

std::variant<ConfidenceAnswer, ParseFailure> parse_confidence(std::string_view raw) {
  std::string_view s = trim(raw);
  if (s.empty()) return ParseFailure{"empty response"};
  skip_opening(s);
  std::string error;
  auto c1 = take_number(s, error);
  if (!c1) return ParseFailure{"first confidence: " + error};
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  if (s.empty() || s.front() != ',') return ParseFailure{"expected ',' between the two confidences"};
  s.remove_prefix(1);
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  auto c2 = take_number(s, error);
  if (!c2) return ParseFailure{"second confidence: " + error};
  if (!s.empty() && is_digit(s.front())) return ParseFailure{"malformed second confidence"};
  for (double v : {*c1, *c2}) {
    if (v > 100.0) return ParseFailure{fmt::format("confidence {} outside [0, 100]", v)};
  }
  ConfidenceAnswer out;
  double sum = *c1 + *c2;
  if (sum > 100.0) {
    out.conf1 = *c1 * 100.0 / sum;
    out.conf2 = *c2 * 100.0 / sum;
    out.conf3 = 0.0;
    out.rescaled = true;
  } else {
    out.conf1 = *c1;
    out.conf2 = *c2;
    out.conf3 = 100.0 - sum;
  }
  out.explanation = explanation_of(s);
  return out;
}

Category decide_k_threshold(const ConfidenceAnswer& confs, double k, Category tie) {
  if (confs.conf3 > k) return Category::Other;
  if (confs.conf1 > confs.conf2) return Category::Problem;
  if (confs.conf2 > confs.conf1) return Category::Solution;
  return tie;
}

KGridResult grid_search_k(std::span<const ScoredConfidence> scored, double k_min, double k_max, double step,
                          Category tie) {
  if (scored.empty()) throw DataError("k grid search needs at least one scored tweet");
  if (!(step > 0.0) || k_max < k_min) throw ConfigError("k grid needs step > 0 and k_max >= k_min");
  std::vector<Category> gold;
  gold.reserve(scored.size());
  for (const auto& s : scored) gold.push_back(s.gold);

  KGridResult out;
  std::vector<Category> pred(scored.size());
  for (std::size_t i = 0;; ++i) {
    double k = k_min + static_cast<double>(i) * step;
    if (k > k_max + 1e-9) break;
    for (std::size_t j = 0; j < scored.size(); ++j) pred[j] = decide_k_threshold(scored[j].confs, k, tie);
    auto r = classification_report(pred, gold);
    out.curve.push_back({k, r.accuracy, r.macro_f1, r.weighted_f1});
  }
  auto best = [&](double KPoint::*field) {
    const KPoint* b = &out.curve.front();
    for (const auto& p : out.curve) {
      if (p.*field > b->*field) b = &p;
    }
    return b->k;
  };
  out.best_k_accuracy = best(&KPoint::accuracy);
  out.best_k_macro_f1 = best(&KPoint::macro_f1);
  out.best_k_weighted_f1 = best(&KPoint::weighted_f1);
  return out;
}

void write_k_curve_csv(std::ostream& out, const KGridResult& result) {
  csv::write_row(out, {"k", "accuracy", "macro_f1", "weighted_f1"});
  for (const auto& p : result.curve) {
    csv::write_row(out, {fmt::format("{}", p.k), fmt::format("{:.6f}", p.accuracy), fmt::format("{:.6f}", p.macro_f1),
                         fmt::format("{:.6f}", p.weighted_f1)});
  }
}

void LlmEndpoint::validate() const {
  if (base_url.empty()) throw ConfigError("llm.base_url must not be empty");
  if (model.empty()) throw ConfigError("llm.model must not be empty");
  if (api_key_env.empty()) throw ConfigError("llm.api_key_env must not be empty");
  if (!(timeout_seconds > 0.0)) throw ConfigError("llm.timeout_seconds must be positive");
  if (concurrency == 0) throw ConfigError("llm.concurrency must be positive");
  if (backoff_initial_seconds < 0.0 || backoff_max_seconds < backoff_initial_seconds) {
    throw ConfigError("llm backoff needs 0 <= backoff_initial_seconds <= backoff_max_seconds");
  }
}

bool LlmEndpoint::set(const config::Entry& e) {
  const auto& k = e.key;
  if (k == "base_url") {
    base_url = e.value;
  } else if (k == "model") {
    model = e.value;
  } else if (k == "api_key_env") {
    api_key_env = e.value;
  } else if (k == "timeout_seconds") {
    timeout_seconds = config::to_real(e);
  } else if (k == "retries") {
    retries = static_cast<std::size_t>(config::to_uint(e));
  } else if (k == "concurrency") {
    concurrency = config::to_positive(e);
  } else if (k == "backoff_initial_seconds") {
    backoff_initial_seconds = config::to_real(e);
  } else if (k == "backoff_max_seconds") {
    backoff_max_seconds = config::to_real(e);
  } else if (k == "temperature") {
    temperature = config::to_real(e);
  } else if (k == "cache_path") {
    cache_path = e.value;
  } else {
    return false;
  }
  return true;
}

nlohmann::json LlmEndpoint::to_json() const {
  return {{"base_url", base_url},
          {"model", model},
          {"api_key_env", api_key_env},
          {"timeout_seconds", timeout_seconds},
          {"retries", retries},
          {"concurrency", concurrency},
          {"backoff_initial_seconds", backoff_initial_seconds},
          {"backoff_max_seconds", backoff_max_seconds},
          {"temperature", temperature},
          {"cache_path", cache_path.string()}};
}

std::string api_key_from_env(const LlmEndpoint& endpoint) {
  const char* v = std::getenv(endpoint.api_key_env.c_str());
  if (v == nullptr || *v == '\0') {
    throw AuthError(fmt::format("environment variable {} holding the API key is not set", endpoint.api_key_env));
  }
  return v;
}

namespace {

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      entries_[{j.at("model").get<std::string>(), j.at("prompt_hash").get<std::string>()}] =
          j.at("raw_response").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      spdlog::warn("{}:{}: skipping malformed cache line ({})", path_->string(), lineno, ex.what());
    }
  }
}

std::optional<std::string> ResponseCache::find(const std::string& model, const std::string& prompt_hash) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find({model, prompt_hash});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const std::string& model, const std::string& prompt_hash, const std::string& raw) {
  std::lock_guard lock(mu_);
  entries_[{model, prompt_hash}] = raw;
  if (!path_) return;
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  std::ofstream out(*path_, std::ios::app);
  if (!out) throw Error(fmt::format("cannot append to cache {}", path_->string()));
  nlohmann::json j{{"prompt_hash", prompt_hash}, {"model", model}, {"raw_response", raw}, {"timestamp", utc_timestamp()}};
  out << j.dump() << '\n';
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

RemoteOptions remote_options(const LlmEndpoint& endpoint) {
  RemoteOptions o;
  o.model = endpoint.model;
  o.retries = endpoint.retries;
  o.concurrency = endpoint.concurrency;
  o.backoff_initial_seconds = endpoint.backoff_initial_seconds;
  o.backoff_max_seconds = endpoint.backoff_max_seconds;
  return o;
}

double backoff_delay(const RemoteOptions& options, std::size_t retry) {
  if (retry == 0) return 0.0;
  double d = options.backoff_initial_seconds * std::pow(2.0, static_cast<double>(retry - 1));
  return std::min(d, options.backoff_max_seconds);
}

namespace {

std::optional<std::variant<DirectAnswer, ConfidenceAnswer>> parse_for(const PromptSpec& spec, const std::string& raw,
                                                                      std::string& error) {
  if (spec.mode == PromptMode::Direct) {
    auto r = parse_direct(raw);
    if (auto* a = std::get_if<DirectAnswer>(&r)) return *a;
    error = std::get<ParseFailure>(r).reason;
  } else {
    auto r = parse_confidence(raw);
    if (auto* a = std::get_if<ConfidenceAnswer>(&r)) return *a;
    error = std::get<ParseFailure>(r).reason;
  }
  return std::nullopt;
}

RemoteResult classify_one(const Tweet& tweet, const PromptSpec& spec, ChatTransport& transport, ResponseCache& cache,
                          const RemoteOptions& options) {
  RemoteResult out;
  out.tweet_id = tweet.id;
  std::string prompt;
  try {
    prompt = build_prompt(spec, tweet.text);
  } catch (const DataError& ex) {
    out.failure = ex.what();
    return out;
  }
  const std::string hash = sha256_hex(prompt);
  std::string error;
  if (auto raw = cache.find(options.model, hash)) {
    if (auto parsed = parse_for(spec, *raw, error)) {
      out.response = LlmResponse{*raw, *parsed};
      out.from_cache = true;
      return out;
    }
  }
  std::string last_failure;
  for (std::size_t attempt = 0; attempt <= options.retries; ++attempt) {
    if (attempt > 0) {
      double delay = backoff_delay(options, attempt);
      if (options.sleep) {
        options.sleep(delay);
      } else {
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
    }
    ++out.attempts;
    auto reply = transport.complete(options.model, prompt);
    if (reply.kind == TransportReply::Kind::Ok) {
      if (auto parsed = parse_for(spec, reply.text, error)) {
        cache.store(options.model, hash, reply.text);
        out.response = LlmResponse{reply.text, *parsed};
        return out;
      }
      last_failure = "unparseable response: " + error;
    } else if (reply.kind == TransportReply::Kind::Retryable) {
      last_failure = reply.error;
    } else {
      out.failure = reply.error;
      return out;
    }
    spdlog::debug("tweet {} attempt {} failed: {}", tweet.id, out.attempts, last_failure);
  }
  out.failure = fmt::format("{} (after {} attempts)", last_failure, out.attempts);
  return out;
}

}  // namespace

std::vector<RemoteResult> classify_remote(std::span<const Tweet> tweets, const PromptSpec& spec,
                                          ChatTransport& transport, ResponseCache& cache,
                                          const RemoteOptions& options) {
  if (options.model.empty()) throw ConfigError("llm model must not be empty");
  std::vector<RemoteResult> results(tweets.size());
  if (tweets.empty()) return results;
  const std::size_t workers = std::clamp<std::size_t>(options.concurrency, 1, tweets.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto work = [&] {
    while (!abort.load()) {
      std::size_t i = next.fetch_add(1);
      if (i >= tweets.size()) return;
      try {
        results[i] = classify_one(tweets[i], spec, transport, cache, options);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

void write_unclassified_csv(std::ostream& out, std::span<const RemoteResult> results) {
  csv::write_row(out, {"tweet_id", "reason"});
  for (const auto& r : results) {
    if (!r.response) csv::write_row(out, {r.tweet_id, r.failure});
  }
}

void write_llm_results_csv(std::ostream& out, std::span<const RemoteResult> results, const PromptSpec& spec) {
  if (spec.mode == PromptMode::Direct) {
    csv::write_row(out, {"tweet_id", "label", "explanation", "raw"});
  } else {
    csv::write_row(out, {"tweet_id", "conf1", "conf2", "conf3", "rescaled", "explanation", "raw"});
  }
  for (const auto& r : results) {
    if (!r.response) continue;
    if (const auto* d = std::get_if<DirectAnswer>(&r.response->parsed)) {
      csv::write_row(out, {r.tweet_id, std::to_string(code_of(d->label)), d->explanation.value_or(""), r.response->raw});
    } else {
      const auto& c = std::get<ConfidenceAnswer>(r.response->parsed);
      csv::write_row(out, {r.tweet_id, fmt::format("{}", c.conf1), fmt::format("{}", c.conf2),
                           fmt::format("{}", c.conf3), c.rescaled ? "1" : "0", c.explanation.value_or(""),
                           r.response->raw});
    }
  }
}

std::map<std::string, ConfidenceAnswer> read_confidence_results_csv(std::istream& in) {
  csv::Table table(in);
  table.require({"tweet_id", "conf1", "conf2", "conf3", "rescaled"});
  const auto id = *table.column("tweet_id");
  const auto c1 = *table.column("conf1");
  const auto c2 = *table.column("conf2");
  const auto c3 = *table.column("conf3");
  const auto rs = *table.column("rescaled");
  std::map<std::string, ConfidenceAnswer> out;
  csv::Record rec;
  while (table.next(rec)) {
    if (rec.fields.size() < table.header().size()) {
      throw DataError(fmt::format("line {}: expected {} fields", rec.line, table.header().size()));
    }
    ConfidenceAnswer a;
    try {
      a.conf1 = std::stod(rec.fields[c1]);
      a.conf2 = std::stod(rec.fields[c2]);
      a.conf3 = std::stod(rec.fields[c3]);
    } catch (const std::exception&) {
      throw DataError(fmt::format("line {}: non-numeric confidence", rec.line));
    }
    a.rescaled = rec.fields[rs] == "1";
    if (!out.emplace(rec.fields[id], a).second) {
      throw DataError(fmt::format("line {}: duplicate tweet_id {}", rec.line, rec.fields[id]));
    }
  }
  return out;
}

}  // namespace polyframe
