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

#include <gtest/gtest.h>

#include <cstdlib>
#include <map>
#include <mutex>
#include <sstream>

#include "polyframe/common/hash.hpp"
#include "polyframe/common/rng.hpp"
#include "polyframe/llm/llm.hpp"
#include "support.hpp"

using namespace polyframe;
using namespace polyframe::testing;

namespace {

const PromptSpec kDirectNo{PromptMode::Direct, false};
const PromptSpec kDirectWith{PromptMode::Direct, true};
const PromptSpec kConfNo{PromptMode::Confidence, false};
const PromptSpec kConfWith{PromptMode::Confidence, true};

DirectAnswer direct_ok(std::string_view raw) {
  auto r = parse_direct(raw);
  if (auto* f = std::get_if<ParseFailure>(&r)) ADD_FAILURE() << "failed on '" << raw << "': " << f->reason;
  auto* a = std::get_if<DirectAnswer>(&r);
  return a ? *a : DirectAnswer{};
}

bool direct_fails(std::string_view raw) { return std::holds_alternative<ParseFailure>(parse_direct(raw)); }

ConfidenceAnswer conf_ok(std::string_view raw) {
  auto r = parse_confidence(raw);
  if (auto* f = std::get_if<ParseFailure>(&r)) ADD_FAILURE() << "failed on '" << raw << "': " << f->reason;
  auto* a = std::get_if<ConfidenceAnswer>(&r);
  return a ? *a : ConfidenceAnswer{};
}

bool conf_fails(std::string_view raw) { return std::holds_alternative<ParseFailure>(parse_confidence(raw)); }

// Replays scripted replies per prompt and counts calls.
class ScriptedTransport : public ChatTransport {
 public:
  std::vector<TransportReply> script;
  TransportReply fallback{TransportReply::Kind::Ok, "1", ""};
  bool throw_auth = false;
  std::size_t calls = 0;

  TransportReply complete(const std::string&, const std::string&) override {
    std::lock_guard lock(mu_);
    if (throw_auth) throw AuthError("401 unauthorized");
    std::size_t i = calls++;
    return i < script.size() ? script[i] : fallback;
  }

 private:
  std::mutex mu_;
};

RemoteOptions fast_options(std::vector<double>* sleeps = nullptr) {
  RemoteOptions o;
  o.model = "mock-model";
  o.retries = 3;
  o.concurrency = 1;
  o.sleep = [sleeps](double d) {
    if (sleeps) sleeps->push_back(d);
  };
  return o;
}

std::vector<Tweet> tweets(std::size_t n) {
  std::vector<Tweet> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"id" + std::to_string(i), "tweet text " + std::to_string(i), "a", {2020, 1, 1}});
  return out;
}

}  // namespace

TEST(Prompts, TemplatesMatchGoldenFilesByteForByte) {
  for (const auto& spec : {kDirectNo, kDirectWith, kConfNo, kConfWith}) {
    auto golden = read_file(golden_dir() / ("prompt_" + spec.name() + ".txt"));
    ASSERT_FALSE(golden.empty()) << spec.name();
    EXPECT_EQ(std::string(prompt_template(spec)), golden) << spec.name();
  }
}

TEST(Prompts, TweetSlotIsReplacedOnce) {
  auto p = build_prompt(kDirectNo, "Our roads are crumbling.");
  EXPECT_EQ(p.find("[tweet text]"), std::string::npos);
  EXPECT_NE(p.find("Our roads are crumbling."), std::string::npos);
  auto tmpl = std::string(prompt_template(kDirectNo));
  EXPECT_EQ(p.size(), tmpl.size() - std::string("[tweet text]").size() + std::string("Our roads are crumbling.").size());
  EXPECT_NE(p.back(), '\n');
}

TEST(Prompts, EmptyTweetRejected) {
  EXPECT_THROW(build_prompt(kConfWith, "   "), DataError);
}

TEST(Prompts, SolutionLineTrailingSpace) {
  EXPECT_NE(std::string(prompt_template(kDirectNo)).find("resolution \n"), std::string::npos);
  EXPECT_EQ(std::string(prompt_template(kDirectWith)).find("resolution \n"), std::string::npos);
}

TEST(DirectParser, AcceptsLabelForms) {
  EXPECT_EQ(direct_ok("1").label, Category::Problem);
  EXPECT_EQ(direct_ok("2").label, Category::Solution);
  EXPECT_EQ(direct_ok("3").label, Category::Other);
  EXPECT_EQ(direct_ok("  2\n").label, Category::Solution);
  EXPECT_EQ(direct_ok("[1]").label, Category::Problem);
  EXPECT_EQ(direct_ok("(3)").label, Category::Other);
  EXPECT_EQ(direct_ok("**2**").label, Category::Solution);
  EXPECT_EQ(direct_ok("\"1\"").label, Category::Problem);
  EXPECT_EQ(direct_ok("Class 2").label, Category::Solution);
  EXPECT_EQ(direct_ok("class: 3").label, Category::Other);
  EXPECT_EQ(direct_ok("Category #1").label, Category::Problem);
  EXPECT_EQ(direct_ok("Answer: 2").label, Category::Solution);
  EXPECT_EQ(direct_ok("1.").label, Category::Problem);
  EXPECT_EQ(direct_ok("3, political statement").label, Category::Other);
  EXPECT_FALSE(direct_ok("2").explanation.has_value());
}

TEST(DirectParser, ExtractsExplanation) {
  EXPECT_EQ(direct_ok("1, [The tweet describes rising costs.]").explanation, "The tweet describes rising costs.");
  EXPECT_EQ(direct_ok("2 (proposes a bill)").explanation, "proposes a bill");
  EXPECT_EQ(direct_ok("[3], thanks voters").explanation, "thanks voters");
  EXPECT_EQ(direct_ok("2\nIt proposes a fix.").explanation, "It proposes a fix.");
}

TEST(DirectParser, RejectsMalformed) {
  EXPECT_TRUE(direct_fails(""));
  EXPECT_TRUE(direct_fails("   "));
  EXPECT_TRUE(direct_fails("0"));
  EXPECT_TRUE(direct_fails("4"));
  EXPECT_TRUE(direct_fails("12"));
  EXPECT_TRUE(direct_fails("2a"));
  EXPECT_TRUE(direct_fails("1.5"));
  EXPECT_TRUE(direct_fails("Problem"));
  EXPECT_TRUE(direct_fails("I cannot classify this."));
  EXPECT_TRUE(direct_fails("-1"));
  EXPECT_TRUE(direct_fails("Classification 1"));
}

TEST(ConfidenceParser, AcceptsNumberPairs) {
  auto a = conf_ok("70, 20");
  EXPECT_DOUBLE_EQ(a.conf1, 70);
  EXPECT_DOUBLE_EQ(a.conf2, 20);
  EXPECT_DOUBLE_EQ(a.conf3, 10);
  EXPECT_FALSE(a.rescaled);
  auto b = conf_ok("[10%, 85%]");
  EXPECT_DOUBLE_EQ(b.conf2, 85);
  EXPECT_DOUBLE_EQ(b.conf3, 5);
  auto c = conf_ok("0,0");
  EXPECT_DOUBLE_EQ(c.conf3, 100);
  auto d = conf_ok("12.5 , 30.25");
  EXPECT_DOUBLE_EQ(d.conf1, 12.5);
  EXPECT_DOUBLE_EQ(d.conf3, 57.25);
  auto e = conf_ok("100, 0");
  EXPECT_DOUBLE_EQ(e.conf3, 0);
  EXPECT_FALSE(e.rescaled);
}

TEST(ConfidenceParser, RescalesOverfullPairs) {
  auto a = conf_ok("70,50");
  EXPECT_TRUE(a.rescaled);
  EXPECT_NEAR(a.conf1, 58.333333333333336, 1e-9);
  EXPECT_NEAR(a.conf2, 41.666666666666664, 1e-9);
  EXPECT_DOUBLE_EQ(a.conf3, 0);
  EXPECT_NEAR(a.conf1 + a.conf2 + a.conf3, 100.0, 1e-9);
}

TEST(ConfidenceParser, ExtractsExplanation) {
  EXPECT_EQ(conf_ok("60, 30, [It names a problem.]").explanation, "It names a problem.");
  EXPECT_EQ(conf_ok("(5, 5) mostly ceremonial").explanation, "mostly ceremonial");
  EXPECT_FALSE(conf_ok("5, 5").explanation.has_value());
}

TEST(ConfidenceParser, RejectsMalformed) {
  EXPECT_TRUE(conf_fails(""));
  EXPECT_TRUE(conf_fails("70"));
  EXPECT_TRUE(conf_fails("70 20"));
  EXPECT_TRUE(conf_fails("seventy, twenty"));
  EXPECT_TRUE(conf_fails("150, 0"));
  EXPECT_TRUE(conf_fails("20, 101"));
  EXPECT_TRUE(conf_fails("-5, 20"));
  EXPECT_TRUE(conf_fails("7a, 20"));
  EXPECT_TRUE(conf_fails("70,"));
}

TEST(ConfidenceParser, RandomPairsRoundTrip) {
  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    int a = static_cast<int>(rng.uniform_index(101)), b = static_cast<int>(rng.uniform_index(101));
    auto r = conf_ok(std::to_string(a) + ", " + std::to_string(b));
    EXPECT_NEAR(r.conf1 + r.conf2 + r.conf3, 100.0, 1e-9);
    EXPECT_EQ(r.rescaled, a + b > 100);
    EXPECT_GE(r.conf3, 0.0);
  }
}

TEST(KThreshold, DecisionRule) {
  ConfidenceAnswer c{20, 30, 50, false, {}};
  EXPECT_EQ(decide_k_threshold(c, 40), Category::Other);
  EXPECT_EQ(decide_k_threshold(c, 50), Category::Solution);
  c = {40, 40, 20, false, {}};
  EXPECT_EQ(decide_k_threshold(c, 50), Category::Problem);
  EXPECT_EQ(decide_k_threshold(c, 50, Category::Solution), Category::Solution);
}

TEST(KThreshold, GridMatchesReferenceOnRandomInputs) {
  Rng rng(22);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n = 5 + rng.uniform_index(60);
    std::vector<ScoredConfidence> scored;
    for (std::size_t i = 0; i < n; ++i) {
      double a = static_cast<double>(rng.uniform_index(101));
      double b = static_cast<double>(rng.uniform_index(101 - static_cast<std::size_t>(a)));
      scored.push_back({{a, b, 100 - a - b, false, {}}, category_at(rng.uniform_index(3))});
    }
    auto g = grid_search_k(scored);
    auto ref = ref_grid(scored);
    ASSERT_EQ(g.curve.size(), 100u);
    for (std::size_t k = 0; k < 100; ++k) {
      ASSERT_DOUBLE_EQ(g.curve[k].k, static_cast<double>(k + 1));
      ASSERT_NEAR(g.curve[k].accuracy, ref.accuracy[k], 1e-12);
      ASSERT_NEAR(g.curve[k].macro_f1, ref.macro_f1[k], 1e-12);
    }
    EXPECT_EQ(g.best_k_accuracy, ref.best_k_accuracy);
    EXPECT_EQ(g.best_k_macro_f1, ref.best_k_macro_f1);
  }
}

TEST(KThreshold, GridRejectsBadRanges) {
  std::vector<ScoredConfidence> s{{{10, 10, 80, false, {}}, Category::Other}};
  EXPECT_THROW(grid_search_k({}), DataError);
  EXPECT_THROW(grid_search_k(s, 10, 5), ConfigError);
  EXPECT_THROW(grid_search_k(s, 1, 5, 0), ConfigError);
  std::ostringstream ss;
  write_k_curve_csv(ss, grid_search_k(s, 1, 3));
  const auto csv = ss.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Remote, BackoffDoublesAndCaps) {
  RemoteOptions o;
  o.backoff_initial_seconds = 1;
  o.backoff_max_seconds = 5;
  EXPECT_EQ(backoff_delay(o, 0), 0);
  EXPECT_EQ(backoff_delay(o, 1), 1);
  EXPECT_EQ(backoff_delay(o, 2), 2);
  EXPECT_EQ(backoff_delay(o, 3), 4);
  EXPECT_EQ(backoff_delay(o, 4), 5);
}

TEST(Remote, RetriesTransientFailuresThenSucceeds) {
  ScriptedTransport t;
  t.script = {{TransportReply::Kind::Retryable, "", "429"}, {TransportReply::Kind::Ok, "garbage", ""},
              {TransportReply::Kind::Ok, "2, [proposes]", ""}};
  ResponseCache cache;
  std::vector<double> sleeps;
  auto r = classify_remote(tweets(1), kDirectWith, t, cache, fast_options(&sleeps));
  ASSERT_TRUE(r[0].response.has_value());
  EXPECT_EQ(r[0].attempts, 3u);
  EXPECT_EQ(std::get<DirectAnswer>(r[0].response->parsed).label, Category::Solution);
  EXPECT_EQ(sleeps, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(cache.size(), 1u);
}

TEST(Remote, ExhaustedRetriesLeaveTweetUnclassified) {
  ScriptedTransport t;
  t.fallback = {TransportReply::Kind::Ok, "I am not sure", ""};
  ResponseCache cache;
  auto r = classify_remote(tweets(2), kDirectNo, t, cache, fast_options());
  for (const auto& x : r) {
    EXPECT_FALSE(x.response.has_value());
    EXPECT_EQ(x.attempts, 4u);
    EXPECT_NE(x.failure.find("after 4 attempts"), std::string::npos);
  }
  EXPECT_EQ(cache.size(), 0u);
  std::ostringstream ss;
  write_unclassified_csv(ss, r);
  EXPECT_NE(ss.str().find("id1"), std::string::npos);
}

TEST(Remote, FatalReplyStopsImmediately) {
  ScriptedTransport t;
  t.fallback = {TransportReply::Kind::Fatal, "", "400 bad request"};
  ResponseCache cache;
  auto r = classify_remote(tweets(1), kDirectNo, t, cache, fast_options());
  EXPECT_EQ(r[0].attempts, 1u);
  EXPECT_EQ(r[0].failure, "400 bad request");
}

TEST(Remote, AuthErrorAbortsTheRun) {
  ScriptedTransport t;
  t.throw_auth = true;
  ResponseCache cache;
  auto o = fast_options();
  o.concurrency = 3;
  EXPECT_THROW(classify_remote(tweets(10), kDirectNo, t, cache, o), AuthError);
}

TEST(Remote, CacheAvoidsRepeatCallsAndPersists) {
  TempDir dir;
  auto path = dir / "cache.jsonl";
  ScriptedTransport t;
  t.fallback = {TransportReply::Kind::Ok, "40, 50", ""};
  {
    ResponseCache cache(path);
    auto o = fast_options();
    o.concurrency = 4;
    auto r = classify_remote(tweets(6), kConfNo, t, cache, o);
    EXPECT_EQ(t.calls, 6u);
    for (const auto& x : r) EXPECT_FALSE(x.from_cache);
  }
  ResponseCache reloaded(path);
  EXPECT_EQ(reloaded.size(), 6u);
  auto r = classify_remote(tweets(6), kConfNo, t, reloaded, fast_options());
  EXPECT_EQ(t.calls, 6u);
  for (const auto& x : r) {
    EXPECT_TRUE(x.from_cache);
    EXPECT_DOUBLE_EQ(std::get<ConfidenceAnswer>(x.response->parsed).conf3, 10);
  }
  auto key = sha256_hex(build_prompt(kConfNo, "tweet text 0"));
  EXPECT_EQ(reloaded.find("mock-model", key), "40, 50");
  EXPECT_FALSE(reloaded.find("other-model", key).has_value());
}

TEST(Remote, ResultOrderFollowsInputUnderConcurrency) {
  ScriptedTransport t;
  ResponseCache cache;
  auto o = fast_options();
  o.concurrency = 4;
  auto in = tweets(25);
  auto r = classify_remote(in, kDirectNo, t, cache, o);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(r[i].tweet_id, in[i].id);
}

TEST(Remote, ConfidenceCsvRoundTrip) {
  ScriptedTransport t;
  t.fallback = {TransportReply::Kind::Ok, "70,50, [both]", ""};
  ResponseCache cache;
  auto r = classify_remote(tweets(3), kConfWith, t, cache, fast_options());
  std::stringstream ss;
  write_llm_results_csv(ss, r, kConfWith);
  auto back = read_confidence_results_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_NEAR(back["id0"].conf1, 58.333333333333336, 1e-6);
  EXPECT_TRUE(back["id0"].rescaled);
}

TEST(Remote, ApiKeyComesFromEnvironment) {
  LlmEndpoint e;
  e.api_key_env = "POLYFRAME_TEST_KEY_UNSET_X";
  ::unsetenv(e.api_key_env.c_str());
  EXPECT_THROW(api_key_from_env(e), AuthError);
  ::setenv(e.api_key_env.c_str(), "sk-test", 1);
  EXPECT_EQ(api_key_from_env(e), "sk-test");
  EXPECT_EQ(e.to_json().dump().find("sk-test"), std::string::npos);
  ::unsetenv(e.api_key_env.c_str());
}

TEST(Remote, HttpTransportReportsUnreachableHostAsRetryable) {
  HttpChatTransport t("http://127.0.0.1:9/v1", "k", 0.5, 0.0);
  auto r = t.complete("m", "p");
  EXPECT_EQ(r.kind, TransportReply::Kind::Retryable);
}
