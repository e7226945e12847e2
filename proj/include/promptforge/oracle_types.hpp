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

#include <optional>
#include <string>

#include "promptforge/errors.hpp"

namespace promptforge {

struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 64;
  std::optional<int> seed;
};

/// A single-turn chat call: system prompt plus one user message.
struct ChatRequest {
  std::string system_prompt;
  std::string user_message;
  DecodeParams decode;

  void validate() const {
    if (decode.max_tokens < 1)
      throw ContractError("max_tokens must be >= 1");
    if (decode.temperature < 0.0)
      throw ContractError("temperature must be >= 0");
  }
};

struct ModelResponse {
  std::string text;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  long latency_ms = 0;
  bool from_cache = false;
};

/// Abstract chat-completion backend. Implementations must be safe to
/// call from multiple threads.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Stable identifier used in cache keys; distinct backends must not
  /// collide.
  virtual std::string id() const = 0;
  virtual std::string model() const = 0;
  virtual ModelResponse complete(const ChatRequest& request) = 0;
};

}  // namespace promptforge
