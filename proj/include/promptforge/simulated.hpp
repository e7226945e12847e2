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

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/metrics.hpp"
#include "promptforge/oracle_types.hpp"
#include "promptforge/util.hpp"

namespace promptforge {

/// Deterministic rule-based stand-in for a victim LLM so the whole
/// attack pipeline runs offline.
///
/// Response rules, given the normalized token set W of the system
/// prompt:
///   (a) if any anchor token is missing from W, the prompt is too
///       damaged to work and every question gets corruption_response;
///   (b) else if the question is a known target and W contains at least
///       one trigger token, the adversarial answer is returned;
///   (c) else the correct answer from the answer book (unknown
///       questions get corruption_response).
struct SimulatedModelConfig {
  std::map<std::string, std::string> answer_book;       // id -> correct
  std::map<std::string, std::string> adversarial_book;  // target id -> y_adv
  std::set<std::string> trigger_lexicon;                // normalized tokens
  std::set<std::string> anchor_lexicon;                 // normalized tokens
  std::string corruption_response;
  std::map<std::string, std::string> question_index;    // question -> id

  void validate() const {
    for (const auto& t : trigger_lexicon)
      if (anchor_lexicon.count(t))
        throw ConfigError("trigger and anchor lexicons must be disjoint: " + t);
    for (const auto& [id, unused] : adversarial_book)
      if (!answer_book.count(id))
        throw ConfigError("target id missing from answer_book: " + id);
    for (const auto& [question, id] : question_index)
      if (!answer_book.count(id))
        throw ConfigError("question_index id missing from answer_book: " + id);
  }

  static SimulatedModelConfig from_json(const nlohmann::json& j) {
    SimulatedModelConfig c;
    c.answer_book =
        j.at("answer_book").get<std::map<std::string, std::string>>();
    c.adversarial_book =
        j.at("adversarial_book").get<std::map<std::string, std::string>>();
    for (const auto& t : j.at("trigger_lexicon"))
      c.trigger_lexicon.insert(t.get<std::string>());
    for (const auto& t : j.at("anchor_lexicon"))
      c.anchor_lexicon.insert(t.get<std::string>());
    c.corruption_response = j.at("corruption_response").get<std::string>();
    c.question_index =
        j.at("question_index").get<std::map<std::string, std::string>>();
    c.validate();
    return c;
  }

  static SimulatedModelConfig load(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("simulated model config " + path + ": " + e.what());
    }
    return from_json(j);
  }

  /// Resolves a user message to a question id. Exact lookup first; a
  /// rendered message (e.g. with answer options appended) matches the
  /// longest known question contained in it.
  std::optional<std::string> resolve_question(
      const std::string& user_message) const {
    auto it = question_index.find(user_message);
    if (it != question_index.end()) return it->second;
    const std::string* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [question, id] : question_index) {
      if (question.size() > best_len &&
          user_message.find(question) != std::string::npos) {
        best = &id;
        best_len = question.size();
      }
    }
    if (best) return *best;
    return std::nullopt;
  }
};

/// Pure function from (config, request) to the model reply.
inline std::string simulated_respond(const SimulatedModelConfig& config,
                                     const ChatRequest& request) {
  std::vector<std::string> tokens = normalize_answer(request.system_prompt);
  std::set<std::string> w(tokens.begin(), tokens.end());
  for (const auto& anchor : config.anchor_lexicon)
    if (!w.count(anchor)) return config.corruption_response;
  auto id = config.resolve_question(request.user_message);
  if (!id) return config.corruption_response;
  if (config.adversarial_book.count(*id)) {
    for (const auto& trigger : config.trigger_lexicon)
      if (w.count(trigger)) return config.adversarial_book.at(*id);
  }
  return config.answer_book.at(*id);
}

/// ChatBackend over SimulatedModelConfig. `fail_after` >= 0 makes every
/// call past that count throw a network error; used to exercise retry
/// and resume paths deterministically.
class SimulatedBackend : public ChatBackend {
 public:
  explicit SimulatedBackend(SimulatedModelConfig config, long fail_after = -1)
      : config_(std::move(config)), fail_after_(fail_after) {}

  std::string id() const override { return "simulated"; }
  std::string model() const override { return "simulated"; }

  ModelResponse complete(const ChatRequest& request) override {
    long n = calls_.fetch_add(1);
    if (fail_after_ >= 0 && n >= fail_after_)
      throw OracleError(OracleError::Kind::network,
                        "simulated network failure (injected)");
    ModelResponse r;
    r.text = simulated_respond(config_, request);
    r.prompt_tokens = static_cast<long>(
        (request.system_prompt.size() + request.user_message.size()) / 4 + 1);
    r.completion_tokens = static_cast<long>(r.text.size() / 4 + 1);
    return r;
  }

  long calls() const { return calls_.load(); }
  const SimulatedModelConfig& config() const { return config_; }

 private:
  SimulatedModelConfig config_;
  long fail_after_;
  std::atomic<long> calls_{0};
};

/// Replays a fixed list of responses, cycling when exhausted. Handy as
/// a scripted rewriter or judge in offline runs.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> responses,
                           bool cycle = true)
      : responses_(std::move(responses)), cycle_(cycle) {
    if (responses_.empty())
      responses_.push_back("");
  }

  static std::shared_ptr<ScriptedBackend> load(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("scripted responses " + path + ": " + e.what());
    }
    std::vector<std::string> responses;
    for (const auto& r : j) responses.push_back(r.get<std::string>());
    return std::make_shared<ScriptedBackend>(std::move(responses));
  }

  std::string id() const override { return "scripted"; }
  std::string model() const override { return "scripted"; }

  ModelResponse complete(const ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t i = next_;
    if (i >= responses_.size()) {
      if (!cycle_)
        throw OracleError(OracleError::Kind::protocol,
                          "scripted backend exhausted");
      i = next_ % responses_.size();
    }
    ++next_;
    ModelResponse r;
    r.text = responses_[i];
    r.prompt_tokens = static_cast<long>(
        (request.system_prompt.size() + request.user_message.size()) / 4 + 1);
    r.completion_tokens = static_cast<long>(r.text.size() / 4 + 1);
    return r;
  }

 private:
  std::vector<std::string> responses_;
  bool cycle_;
  std::size_t next_ = 0;
  std::mutex mutex_;
};

}  // namespace promptforge
