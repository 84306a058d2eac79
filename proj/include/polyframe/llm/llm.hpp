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
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "polyframe/common/config.hpp"
#include "polyframe/common/error.hpp"
#include "polyframe/corpus/types.hpp"

namespace polyframe {

enum class PromptMode { Direct, Confidence };

struct PromptSpec {
  PromptMode mode = PromptMode::Direct;
  bool with_explanation = false;

  std::string name() const;  // e.g. "direct_no_explanation"
};

// The prompt template with its "[tweet text]" slot.
std::string_view prompt_template(const PromptSpec& spec);

// Template with the slot replaced by `tweet_text`. Throws DataError on empty text.
std::string build_prompt(const PromptSpec& spec, std::string_view tweet_text);

struct ParseFailure {
  std::string reason;
};

struct DirectAnswer {
  Category label = Category::Other;  // prompt class 3 ("Political") maps to Other
  std::optional<std::string> explanation;
};

struct ConfidenceAnswer {
  double conf1 = 0.0;
  double conf2 = 0.0;
  double conf3 = 0.0;  // 100 - conf1 - conf2
  bool rescaled = false;
  std::optional<std::string> explanation;
};

// Grammar: optional whitespace, opening brackets/quotes/asterisks and a
// "class"/"category"/"answer" word with optional ':' or '#', then the label 1, 2 or 3 as a whole
// number, then optionally closing marks and an explanation (one enclosing
// pair of [] or () is removed).
std::variant<DirectAnswer, ParseFailure> parse_direct(std::string_view raw);

// Grammar: optional opening marks, a number in [0, 100] with optional '%',
// a comma, a second such number, then an optional explanation. Sums above
// 100 are rescaled proportionally to 100 and flagged.
std::variant<ConfidenceAnswer, ParseFailure> parse_confidence(std::string_view raw);

// conf3 > k gives Other; otherwise the larger of conf1/conf2, with `tie`
// deciding equal values.
Category decide_k_threshold(const ConfidenceAnswer& confs, double k, Category tie = Category::Problem);

struct ScoredConfidence {
  ConfidenceAnswer confs;
  Category gold = Category::Other;
};

struct KPoint {
  double k = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
};

struct KGridResult {
  std::vector<KPoint> curve;
  double best_k_accuracy = 0.0;
  double best_k_macro_f1 = 0.0;
  double best_k_weighted_f1 = 0.0;
};

// Evaluates k = k_min, k_min + step, ... <= k_max; each best k is the lowest
// one reaching the maximum. Throws DataError on an empty set.
KGridResult grid_search_k(std::span<const ScoredConfidence> scored, double k_min = 1.0, double k_max = 100.0,
                          double step = 1.0, Category tie = Category::Problem);

void write_k_curve_csv(std::ostream& out, const KGridResult& result);

// ---------------------------------------------------------------------------
// Remote classification.

struct LlmEndpoint {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  std::string api_key_env = "POLYFRAME_LLM_API_KEY";
  double timeout_seconds = 60.0;
  std::size_t retries = 4;  // extra attempts after the first
  std::size_t concurrency = 4;
  double backoff_initial_seconds = 1.0;
  double backoff_max_seconds = 30.0;
  double temperature = 0.0;
  std::filesystem::path cache_path = "llm_cache.jsonl";

  void validate() const;
  // Keys without the "llm." prefix.
  bool set(const config::Entry& entry);
  nlohmann::json to_json() const;  // never includes the key itself
};

// Credential rejected by the service: aborts the whole run.
class AuthError : public Error {
 public:
  using Error::Error;
};

struct TransportReply {
  enum class Kind { Ok, Retryable, Fatal };
  Kind kind = Kind::Ok;
  std::string text;   // completion text when Ok
  std::string error;  // description otherwise
};

// Text-in/text-out completion service. Implementations throw AuthError on a
// rejected credential and must be safe to call from several threads.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual TransportReply complete(const std::string& model, const std::string& prompt) = 0;
};

// OpenAI-compatible POST {base_url}/chat/completions with a bearer key.
class HttpChatTransport final : public ChatTransport {
 public:
  HttpChatTransport(std::string base_url, std::string api_key, double timeout_seconds, double temperature);
  TransportReply complete(const std::string& model, const std::string& prompt) override;

 private:
  std::string scheme_host_;
  std::string path_prefix_;
  std::string api_key_;
  double timeout_seconds_;
  double temperature_;
};

// Reads the key from the endpoint's environment variable. Throws AuthError
// when unset or empty.
std::string api_key_from_env(const LlmEndpoint& endpoint);

// Append-only JSONL response cache keyed by (model, SHA-256 of the prompt).
class ResponseCache {
 public:
  ResponseCache() = default;  // in-memory only
  explicit ResponseCache(std::filesystem::path path);

  std::optional<std::string> find(const std::string& model, const std::string& prompt_hash) const;
  void store(const std::string& model, const std::string& prompt_hash, const std::string& raw);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::string> entries_;
};

struct LlmResponse {
  std::string raw;
  std::variant<DirectAnswer, ConfidenceAnswer> parsed;
};

struct RemoteResult {
  std::string tweet_id;
  std::optional<LlmResponse> response;  // unset: unclassified
  std::string failure;
  std::size_t attempts = 0;
  bool from_cache = false;
};

struct RemoteOptions {
  std::string model;
  std::size_t retries = 4;
  std::size_t concurrency = 4;
  double backoff_initial_seconds = 1.0;
  double backoff_max_seconds = 30.0;
  // Injected for tests; defaults to sleeping the calling thread.
  std::function<void(double)> sleep;
};

RemoteOptions remote_options(const LlmEndpoint& endpoint);

// Delay before retry number `retry` (1-based): initial * 2^(retry-1), capped.
double backoff_delay(const RemoteOptions& options, std::size_t retry);

// One request per tweet with at most `concurrency` in flight; results in
// input order. Transport errors and unparseable replies are retried with
// exponential backoff; exhausted budgets yield unclassified results. Only
// parseable replies are cached. AuthError propagates.
std::vector<RemoteResult> classify_remote(std::span<const Tweet> tweets, const PromptSpec& spec,
                                          ChatTransport& transport, ResponseCache& cache,
                                          const RemoteOptions& options);

// tweet_id, reason
void write_unclassified_csv(std::ostream& out, std::span<const RemoteResult> results);

// Direct: tweet_id, label, explanation, raw. Confidence: tweet_id, conf1,
// conf2, conf3, rescaled, explanation, raw. Unclassified tweets are omitted.
void write_llm_results_csv(std::ostream& out, std::span<const RemoteResult> results, const PromptSpec& spec);

// Reads the confidence variant of the results file, keyed by tweet id.
std::map<std::string, ConfidenceAnswer> read_confidence_results_csv(std::istream& in);

}  // namespace polyframe
