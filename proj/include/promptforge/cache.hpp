/*
 * Copyright 2026 The promptforge authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/oracle_types.hpp"
#include "promptforge/util.hpp"

namespace promptforge {

/// Append-only JSON Lines cache of model responses, keyed by the full
/// request (backend id, model, messages, decode parameters). Entries are
/// flushed line-by-line so an interrupted run can be resumed from disk.
/// Thread-safe.
class QueryCache {
 public:
  QueryCache() = default;

  /// Opens (and loads) a persistent cache file. Missing file is fine.
  static std::shared_ptr<QueryCache> open(const std::string& path) {
    auto cache = std::make_shared<QueryCache>();
    cache->path_ = path;
    std::ifstream in(path);
    if (in) {
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json rec;
        try {
          rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
          throw IoError("cache " + path + " line " + std::to_string(lineno) +
                        ": " + e.what());
        }
        const auto& req = rec.at("request");
        ChatRequest request;
        request.system_prompt = req.at("system_prompt").get<std::string>();
        request.user_message = req.at("user_message").get<std::string>();
        request.decode.temperature = req.at("temperature").get<double>();
        request.decode.max_tokens = req.at("max_tokens").get<int>();
        if (req.contains("seed") && !req.at("seed").is_null())
          request.decode.seed = req.at("seed").get<int>();
        std::string key = canonical_key(req.at("backend").get<std::string>(),
                                        req.at("model").get<std::string>(),
                                        request);
        const auto& res = rec.at("response");
        ModelResponse response;
        response.text = res.at("text").get<std::string>();
        response.prompt_tokens = res.at("prompt_tokens").get<long>();
        response.completion_tokens = res.at("completion_tokens").get<long>();
        response.latency_ms = res.at("latency_ms").get<long>();
        cache->entries_[key] = response;
      }
    }
    return cache;
  }

  /// Canonical request serialization; any field change changes the key.
  static std::string canonical_key(const std::string& backend_id,
                                   const std::string& model,
                                   const ChatRequest& request) {
    nlohmann::json j{
        {"backend", backend_id},
        {"model", model},
        {"system_prompt", request.system_prompt},
        {"user_message", request.user_message},
        {"temperature", request.decode.temperature},
        {"max_tokens", request.decode.max_tokens},
    };
    if (request.decode.seed)
      j["seed"] = *request.decode.seed;
    else
      j["seed"] = nullptr;
    return j.dump();
  }

  static std::string key_digest(const std::string& canonical) {
    return fnv1a64_hex(canonical);
  }

  std::optional<ModelResponse> find(const std::string& canonical) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(canonical);
    if (it == entries_.end()) return std::nullopt;
    ModelResponse r = it->second;
    r.from_cache = true;
    r.latency_ms = 0;
    return r;
  }

  void insert(const std::string& backend_id, const std::string& model,
              const ChatRequest& request, const ModelResponse& response) {
    std::string canonical = canonical_key(backend_id, model, request);
    std::lock_guard<std::mutex> lock(mutex_);
    if (entries_.count(canonical)) return;
    entries_[canonical] = response;
    if (path_.empty()) return;
    nlohmann::json rec{
        {"key", key_digest(canonical)},
        {"request",
         {{"backend", backend_id},
          {"model", model},
          {"system_prompt", request.system_prompt},
          {"user_message", request.user_message},
          {"temperature", request.decode.temperature},
          {"max_tokens", request.decode.max_tokens},
          {"seed", request.decode.seed ? nlohmann::json(*request.decode.seed)
                                       : nlohmann::json(nullptr)}}},
        {"response",
         {{"text", response.text},
          {"prompt_tokens", response.prompt_tokens},
          {"completion_tokens", response.completion_tokens},
          {"latency_ms", response.latency_ms}}},
        {"ts", std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count()},
    };
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to cache file: " + path_);
    out << rec.dump() << "\n";
    out.flush();
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, ModelResponse> entries_;
  std::string path_;
};

}  // namespace promptforge
