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

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polyframe/common/config.hpp"
#include "polyframe/llm/llm.hpp"
#include "polyframe/models/trainer.hpp"
#include "polyframe/selftrain/selftrain.hpp"

namespace polyframe {

// Environment variables read by the command line tool.
inline constexpr const char* kEnvCacheDir = "POLYFRAME_CACHE_DIR";
inline constexpr const char* kEnvDevice = "POLYFRAME_DEVICE";

// Every configurable value: training keys are bare, self-training keys carry
// the "selftrain." prefix and LLM endpoint keys the "llm." prefix.
struct AppConfig {
  ModelConfig model;
  SelfTrainConfig selftrain;
  LlmEndpoint llm;

  void validate() const;
  nlohmann::json to_json() const;
  // SHA-256 of the compact JSON form.
  std::string hash() const;
};

// Applies entries in order onto the defaults and validates. Unknown keys and
// ill-typed values throw ConfigError naming the key and its origin.
AppConfig apply_config(std::span<const config::Entry> entries);

// Reads `path` (if given), then applies "key=value" overrides last.
AppConfig load_config(const std::optional<std::filesystem::path>& path, std::span<const std::string> overrides);

struct RunManifest {
  std::string command;
  std::string config_hash;
  nlohmann::json config;
  std::map<std::string, std::string> input_digests;  // path -> SHA-256
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::string status = "running";
  std::vector<std::string> outputs;

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  // Writes <dir>/manifest.json, replacing an earlier one.
  void write(const std::filesystem::path& dir) const;
};

// ISO-8601 UTC timestamp with seconds.
std::string utc_now();

// Structured JSON-lines log: one object per event with "ts" and "event".
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::filesystem::path& path) { open(path); }

  // Truncates `path` and directs later events to it.
  void open(const std::filesystem::path& path);
  void event(std::string_view name, nlohmann::json fields = nlohmann::json::object());

 private:
  std::optional<std::filesystem::path> path_;
  std::mutex mu_;
};

// Command line entry point; returns the process exit code (0 success,
// 1 runtime error, 2 usage error).
int run_cli(int argc, const char* const* argv);

}  // namespace polyframe
