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

#include <algorithm>
#include <vector>

#include <json.hpp>

#include "promptforge/embedding.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/perplexity.hpp"
#include "promptforge/prompt.hpp"
#include "promptforge/query.hpp"

namespace promptforge {

/// Lexical stealth measurements for one prompt. Both limits are
/// inclusive: a value exactly at the limit passes.
struct StealthReport {
  double max_cosine_to_targets = 0.0;
  double mean_cosine_to_targets = 0.0;
  double perplexity = 0.0;
  double delta_limit = 0.0;
  double tau_limit = 0.0;
  bool pass_similarity = false;
  bool pass_perplexity = false;
};

inline nlohmann::json stealth_to_json(const StealthReport& r) {
  return nlohmann::json{{"max_cosine_to_targets", r.max_cosine_to_targets},
                        {"mean_cosine_to_targets", r.mean_cosine_to_targets},
                        {"perplexity", r.perplexity},
                        {"delta_limit", r.delta_limit},
                        {"tau_limit", r.tau_limit},
                        {"pass_similarity", r.pass_similarity},
                        {"pass_perplexity", r.pass_perplexity}};
}

inline StealthReport stealth_from_json(const nlohmann::json& j) {
  StealthReport r;
  r.max_cosine_to_targets = j.at("max_cosine_to_targets").get<double>();
  r.mean_cosine_to_targets = j.at("mean_cosine_to_targets").get<double>();
  r.perplexity = j.at("perplexity").get<double>();
  r.delta_limit = j.at("delta_limit").get<double>();
  r.tau_limit = j.at("tau_limit").get<double>();
  r.pass_similarity = j.at("pass_similarity").get<bool>();
  r.pass_perplexity = j.at("pass_perplexity").get<bool>();
  return r;
}

/// Max and mean cosine between the prompt text and the target questions.
inline std::pair<double, double> similarity_to_targets(
    const PromptText& prompt, const std::vector<const QueryItem*>& targets,
    const EmbeddingProvider& embedder) {
  if (targets.empty())
    throw ContractError("similarity_to_targets requires target items");
  if (prompt.raw().empty())
    throw DegenerateInputError("cannot embed an empty prompt");
  std::vector<double> p = embedder.embed(prompt.raw());
  double max_cos = -1.0;
  double sum = 0.0;
  for (const QueryItem* t : targets) {
    double c = cosine(p, embedder.embed(t->question));
    max_cos = std::max(max_cos, c);
    sum += c;
  }
  return {max_cos, sum / static_cast<double>(targets.size())};
}

/// Fills a StealthReport. Gating is on the max cosine (conservative);
/// the mean is reported alongside.
inline StealthReport check_stealth(const PromptText& prompt,
                                   const std::vector<const QueryItem*>& targets,
                                   double delta_limit, double tau_limit,
                                   const EmbeddingProvider& embedder,
                                   const PerplexityScorer& scorer) {
  StealthReport r;
  auto [max_cos, mean_cos] = similarity_to_targets(prompt, targets, embedder);
  r.max_cosine_to_targets = max_cos;
  r.mean_cosine_to_targets = mean_cos;
  r.perplexity = scorer.perplexity(prompt.raw());
  r.delta_limit = delta_limit;
  r.tau_limit = tau_limit;
  r.pass_similarity = max_cos <= delta_limit;
  r.pass_perplexity = r.perplexity <= tau_limit;
  return r;
}

}  // namespace promptforge
