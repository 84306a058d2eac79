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

#include <httplib.h>

#include <fmt/format.h>
#include <json.hpp>

#include "polyframe/llm/llm.hpp"

namespace polyframe {

HttpChatTransport::HttpChatTransport(std::string base_url, std::string api_key, double timeout_seconds,
                                     double temperature)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds), temperature_(temperature) {
  auto scheme = base_url.find("://");
  if (scheme == std::string::npos) throw ConfigError(fmt::format("llm.base_url '{}' has no scheme", base_url));
  auto slash = base_url.find('/', scheme + 3);
  scheme_host_ = base_url.substr(0, slash);
  path_prefix_ = slash == std::string::npos ? "" : base_url.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

TransportReply HttpChatTransport::complete(const std::string& model, const std::string& prompt) {
  httplib::Client client(scheme_host_);
  auto secs = static_cast<time_t>(timeout_seconds_);
  auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  client.set_bearer_token_auth(api_key_);

  nlohmann::json body{{"model", model},
                      {"temperature", temperature_},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  auto res = client.Post(path_prefix_ + "/chat/completions", body.dump(), "application/json");
  if (!res) return {TransportReply::Kind::Retryable, "", "transport error: " + httplib::to_string(res.error())};
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw AuthError(fmt::format("service rejected the API key (HTTP {})", status));
  }
  if (status == 408 || status == 409 || status == 429 || status >= 500) {
    return {TransportReply::Kind::Retryable, "", fmt::format("HTTP {}", status)};
  }
  if (status != 200) {
    return {TransportReply::Kind::Fatal, "", fmt::format("HTTP {}: {}", status, res->body.substr(0, 200))};
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) return {TransportReply::Kind::Retryable, "", "completion without text content"};
    return {TransportReply::Kind::Ok, content.get<std::string>(), ""};
  } catch (const nlohmann::json::exception& ex) {
    return {TransportReply::Kind::Retryable, "", fmt::format("malformed completion body: {}", ex.what())};
  }
}

}  // namespace polyframe
