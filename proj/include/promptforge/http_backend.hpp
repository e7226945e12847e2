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

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/oracle_types.hpp"

namespace promptforge {

/// Chat-completions client. Sends
///   POST {base_url}/chat/completions
///   {"model", "messages": [{"role":"system",...},{"role":"user",...}],
///    "temperature", "max_tokens", "seed"?}
/// and reads choices[0].message.content plus usage token counts. The
/// API key is read from an environment variable and sent as a bearer
/// Authorization header. Retries are handled by the Oracle layer; this
/// class maps transport failures onto OracleError kinds.
class HttpBackend : public ChatBackend {
 public:
  HttpBackend(std::string base_url, std::string model,
              std::string api_key_env = "PROMPTFORGE_API_KEY")
      : base_url_(std::move(base_url)),
        model_(std::move(model)),
        api_key_env_(std::move(api_key_env)) {
    split_base_url();
  }

  std::string id() const override { return "http:" + base_url_; }
  std::string model() const override { return model_; }

  static nlohmann::json request_body(const std::string& model,
                                     const ChatRequest& request) {
    nlohmann::json body;
    body["model"] = model;
    body["messages"] = nlohmann::json::array(
        {{{"role", "system"}, {"content", request.system_prompt}},
         {{"role", "user"}, {"content", request.user_message}}});
    body["temperature"] = request.decode.temperature;
    body["max_tokens"] = request.decode.max_tokens;
    if (request.decode.seed) body["seed"] = *request.decode.seed;
    return body;
  }

  ModelResponse complete(const ChatRequest& request) override {
    httplib::Client client(host_);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (const char* key = std::getenv(api_key_env_.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string body = request_body(model_, request).dump();
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body,
                           "application/json");
    if (!res)
      throw OracleError(OracleError::Kind::network,
                        "connection to " + host_ + " failed: " +
                            httplib::to_string(res.error()));
    if (res->status == 429)
      throw OracleError(OracleError::Kind::rate_limit,
                        "rate limited (HTTP 429)");
    if (res->status >= 500)
      throw OracleError(OracleError::Kind::network,
                        "server error (HTTP " + std::to_string(res->status) +
                            ")");
    if (res->status != 200)
      throw OracleError(OracleError::Kind::protocol,
                        "unexpected HTTP status " +
                            std::to_string(res->status) + ": " + res->body);
    return parse_response(res->body);
  }

  static ModelResponse parse_response(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw OracleError(OracleError::Kind::protocol,
                        std::string("malformed response body: ") + e.what());
    }
    ModelResponse r;
    try {
      r.text = j.at("choices").at(0).at("message").at("content")
                   .get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw OracleError(OracleError::Kind::protocol,
                        std::string("response missing choices[0].message."
                                    "content: ") +
                            e.what());
    }
    if (j.contains("usage")) {
      const auto& u = j["usage"];
      r.prompt_tokens = u.value("prompt_tokens", 0L);
      r.completion_tokens = u.value("completion_tokens", 0L);
    }
    return r;
  }

 private:
  void split_base_url() {
    // scheme://host[:port][/prefix]
    std::string rest = base_url_;
    std::size_t scheme = rest.find("://");
    std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    std::size_t slash = rest.find('/', host_start);
    if (slash == std::string::npos) {
      host_ = rest;
      path_prefix_.clear();
    } else {
      host_ = rest.substr(0, slash);
      path_prefix_ = rest.substr(slash);
      while (!path_prefix_.empty() && path_prefix_.back() == '/')
        path_prefix_.pop_back();
    }
  }

  std::string base_url_;
  std::string model_;
  std::string api_key_env_;
  std::string host_;         // scheme://host:port
  std::string path_prefix_;  // e.g. "/v1" or ""
};

}  // namespace promptforge
