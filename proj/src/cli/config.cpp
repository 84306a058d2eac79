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

#include <chrono>
#include <ctime>
#include <fstream>

#include <fmt/format.h>

#include "polyframe/cli/cli.hpp"
#include "polyframe/common/hash.hpp"

namespace polyframe {

void AppConfig::validate() const {
  model.validate();
  selftrain.validate();
  llm.validate();
}

nlohmann::json AppConfig::to_json() const {
  return {{"model", model.to_json()}, {"selftrain", selftrain.to_json()}, {"llm", llm.to_json()}};
}

std::string AppConfig::hash() const { return sha256_hex(to_json().dump()); }

AppConfig apply_config(std::span<const config::Entry> entries) {
  AppConfig cfg;
  for (const auto& e : entries) {
    bool known = false;
    try {
      if (e.key.starts_with("selftrain.")) {
        config::Entry inner{e.key.substr(10), e.value, e.origin};
        known = cfg.selftrain.set(inner);
      } else if (e.key.starts_with("llm.")) {
        config::Entry inner{e.key.substr(4), e.value, e.origin};
        known = cfg.llm.set(inner);
      } else {
        known = cfg.model.set(e);
      }
    } catch (const ConfigError& ex) {
      throw ConfigError(fmt::format("{} ({}: {})", ex.what(), e.origin, e.key));
    }
    if (!known) throw ConfigError(fmt::format("unknown configuration key '{}' ({})", e.key, e.origin));
  }
  cfg.validate();
  return cfg;
}

AppConfig load_config(const std::optional<std::filesystem::path>& path, std::span<const std::string> overrides) {
  std::vector<config::Entry> entries;
  if (path) entries = config::parse_file(*path);
  for (const auto& o : overrides) entries.push_back(config::parse_override(o));
  return apply_config(entries);
}

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const std::filesystem::path& path) { input_digests[path.string()] = sha256_file(path); }

void RunManifest::add_output(const std::filesystem::path& path) { outputs.push_back(path.string()); }

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},       {"config_hash", config_hash}, {"config", config},
          {"inputs", input_digests},  {"seed", seed},               {"started_at", started_at},
          {"finished_at", finished_at}, {"status", status},         {"outputs", outputs}};
}

void RunManifest::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << to_json().dump(2) << '\n';
}

void RunLog::open(const std::filesystem::path& path) {
  std::lock_guard lock(mu_);
  path_ = path;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot create log {}", path.string()));
}

void RunLog::event(std::string_view name, nlohmann::json fields) {
  if (!path_) return;
  if (!fields.is_object()) fields = nlohmann::json{{"value", std::move(fields)}};
  fields["ts"] = utc_now();
  fields["event"] = std::string(name);
  std::lock_guard lock(mu_);
  std::ofstream out(*path_, std::ios::app);
  out << fields.dump() << '\n';
}

}  // namespace polyframe
