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

#include <functional>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "promptforge/harness.hpp"
#include "promptforge/metrics.hpp"
#include "promptforge/oracle.hpp"
#include "promptforge/prompt.hpp"
#include "promptforge/query.hpp"
#include "promptforge/templates.hpp"

namespace promptforge {

struct FailureCase {
  std::string item_id;
  std::string question;
  std::string model_output;
  std::string expected;
};

/// One evaluated prompt in the evolutionary search.
struct AapCandidate {
  PromptText prompt;
  double score = 0.0;
  int iteration = 0;
  std::vector<FailureCase> failure_cases;
  std::string analysis;                   // set once the Analyzer ran on it
  std::optional<double> predicted_score;  // claimed by the Generator; unused
  EvalOutcomes outcomes;
};

struct AapHistory {
  std::vector<AapCandidate> candidates;
  int budget_t = 0;

  /// Highest score; earlier iteration wins ties.
  const AapCandidate& best() const {
    if (candidates.empty()) throw ContractError("empty search history");
    const AapCandidate* best = &candidates.front();
    for (const auto& c : candidates)
      if (c.score > best->score) best = &c;
    return *best;
  }
};

/// Meta-prompt templates and decode settings for the rewriter model.
/// The Analyzer runs at temperature 0; the Generator samples (it must
/// produce prompts different from everything in the history).
struct AapTemplates {
  std::string analyzer;
  std::string generator;
  std::string task_description;
  double analyzer_temperature = 0.0;
  double generator_temperature = 0.7;
  int rewriter_max_tokens = 512;
};

namespace detail {

constexpr int kMaxRenderedFailures = 10;
constexpr int kAnalysisTokenBudget = 200;
constexpr int kMaxDuplicateRetries = 3;

inline std::string render_failure_cases(const std::vector<FailureCase>& cases) {
  std::ostringstream out;
  int rendered = 0;
  for (const auto& f : cases) {
    if (rendered == kMaxRenderedFailures) break;
    if (rendered) out << "\n";
    out << "[" << f.item_id << "] Q: " << f.question
        << " | model: " << f.model_output << " | expected: " << f.expected;
    ++rendered;
  }
  return out.str();
}

inline std::string render_history(const AapHistory& history) {
  std::ostringstream out;
  for (std::size_t i = 0; i < history.candidates.size(); ++i) {
    const auto& c = history.candidates[i];
    if (i) out << "\n";
    out << "Prompt: " << c.prompt.raw() << "\nScore: "
        << format_fixed(c.score, 4);
  }
  return out.str();
}

inline std::string truncate_tokens(const std::string& text, int max_tokens) {
  std::vector<std::string> tokens = split_whitespace(text);
  if (static_cast<int>(tokens.size()) <= max_tokens) return text;
  std::string out;
  for (int i = 0; i < max_tokens; ++i) {
    if (i) out += " ";
    out += tokens[static_cast<std::size_t>(i)];
  }
  return out;
}

/// Strips markdown fencing and one layer of surrounding quotes.
inline std::string strip_fencing(std::string text) {
  text = trim(text);
  if (text.rfind("```", 0) == 0) {
    std::size_t first_newline = text.find('\n');
    if (first_newline != std::string::npos)
      text = text.substr(first_newline + 1);
    std::size_t closing = text.rfind("```");
    if (closing != std::string::npos) text = text.substr(0, closing);
    text = trim(text);
  }
  if (text.size() >= 2 &&
      ((text.front() == '"' && text.back() == '"') ||
       (text.front() == '\'' && text.back() == '\'')))
    text = trim(text.substr(1, text.size() - 2));
  return text;
}

/// Pulls an optional trailing "score: x" line off the generated prompt.
inline std::optional<double> extract_predicted_score(std::string& text) {
  static const std::regex score_line(
      R"(^\s*(predicted\s+score|score)\s*[:=]?\s*(-?[0-9]+(\.[0-9]+)?)\s*$)",
      std::regex::icase);
  std::size_t last_newline = text.find_last_of('\n');
  std::string last_line =
      last_newline == std::string::npos ? text : text.substr(last_newline + 1);
  std::smatch m;
  if (!std::regex_match(last_line, m, score_line)) return std::nullopt;
  double value = std::stod(m[2].str());
  text = last_newline == std::string::npos
             ? std::string()
             : trim(text.substr(0, last_newline));
  return value;
}

}  // namespace detail

/// Evaluator step: queries the victim for every train item, computes the
/// search score, and collects failure cases (benign misses plus targets
/// where the goal answer was not produced).
inline AapCandidate evaluate_candidate(const PromptText& prompt,
                                       const QuerySet& train_sets,
                                       Oracle& victim, const ItemScorer& scorer,
                                       AttackMode mode, int iteration) {
  auto benigns = train_sets.train_benigns();
  auto targets = train_sets.train_targets();
  if (benigns.empty() || targets.empty())
    throw ContractError("evaluate_candidate: empty train split");

  AapCandidate cand;
  cand.prompt = prompt;
  cand.iteration = iteration;
  cand.outcomes = evaluate_outcomes(prompt, benigns, targets, victim, scorer,
                                    mode, std::nullopt,
                                    /*propagate_errors=*/true);
  cand.score = stage1_score(cand.outcomes.benign, cand.outcomes.target, mode);

  auto collect = [&](const std::vector<const QueryItem*>& items,
                     const std::vector<ItemOutcome>& outcomes, bool is_target) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      bool goal_met = is_target && mode == AttackMode::untargeted
                          ? outcomes[i].indicator == 0
                          : outcomes[i].indicator == 1;
      if (goal_met) continue;
      cand.failure_cases.push_back(FailureCase{
          items[i]->id, items[i]->question, outcomes[i].model_output,
          items[i]->gold_answers.front()});
    }
  };
  collect(benigns, cand.outcomes.benign, false);
  collect(targets, cand.outcomes.target, true);
  return cand;
}

/// Analyzer step. On rewriter failure, falls back to a deterministic
/// listing of the first failure cases so the loop can continue.
inline std::string analyze_failures(const AapCandidate& candidate,
                                    const AapTemplates& templates,
                                    Oracle& rewriter) {
  std::string filled = fill_template(
      templates.analyzer,
      {{"task_description", templates.task_description},
       {"prompt", candidate.prompt.raw()},
       {"accuracy", format_fixed(candidate.score, 4)},
       {"failure_cases", detail::render_failure_cases(candidate.failure_cases)}});
  ChatRequest req;
  req.system_prompt = filled;
  req.user_message = "";
  req.decode.temperature = templates.analyzer_temperature;
  req.decode.max_tokens = templates.rewriter_max_tokens;
  try {
    ModelResponse r = rewriter.query(req);
    return detail::truncate_tokens(trim(r.text), detail::kAnalysisTokenBudget);
  } catch (const OracleError&) {
    std::string fallback = "Automatic analysis unavailable. Failure cases:\n" +
                           detail::render_failure_cases(candidate.failure_cases);
    return detail::truncate_tokens(fallback, detail::kAnalysisTokenBudget);
  }
}

/// Generator step. Re-asks (fresh sample) when the rewriter returns a
/// prompt verbatim-identical to one already in the history; three
/// duplicates end the search early.
inline PromptText generate_candidate(const AapHistory& history,
                                     const std::string& analysis,
                                     const AapTemplates& templates,
                                     Oracle& rewriter,
                                     std::optional<double>* predicted_score,
                                     std::optional<int> base_seed = std::nullopt) {
  if (history.candidates.empty())
    throw ContractError("generate_candidate requires a non-empty history");
  std::string filled = fill_template(
      templates.generator,
      {{"task_description", templates.task_description},
       {"history", detail::render_history(history)},
       {"error_analysis", analysis}});

  for (int attempt = 0; attempt < detail::kMaxDuplicateRetries; ++attempt) {
    ChatRequest req;
    req.system_prompt = filled;
    req.user_message = "";
    req.decode.temperature = templates.generator_temperature;
    req.decode.max_tokens = templates.rewriter_max_tokens;
    if (base_seed) req.decode.seed = *base_seed + attempt;
    ModelResponse r = rewriter.query(req);
    std::string text = detail::strip_fencing(r.text);
    std::optional<double> predicted = detail::extract_predicted_score(text);
    if (predicted_score) *predicted_score = predicted;
    bool duplicate = false;
    for (const auto& c : history.candidates)
      if (c.prompt.raw() == text) duplicate = true;
    if (!duplicate && !text.empty()) return tokenize_prompt(text);
  }
  throw DuplicationError("generator repeated known prompts " +
                         std::to_string(detail::kMaxDuplicateRetries) +
                         " times");
}

struct AapResult {
  PromptText p0_star;
  AapHistory history;
  bool ended_early = false;
  std::string end_reason;
};

/// The full Evaluator->Analyzer->Generator loop: evaluates the initial
/// prompt, then refines T times, returning the highest-scoring prompt
/// (earliest iteration on ties). A persistent duplication failure ends
/// the loop early with the best found so far.
inline AapResult run_aap(
    const PromptText& initial_prompt, const QuerySet& train_sets, int budget_t,
    Oracle& victim, Oracle& rewriter, const AapTemplates& templates,
    const ItemScorer& scorer, AttackMode mode,
    const std::function<void(const AapCandidate&)>& on_candidate = nullptr,
    std::optional<int> generator_seed = std::nullopt) {
  if (budget_t < 0) throw ContractError("iteration budget must be >= 0");
  AapResult result;
  result.history.budget_t = budget_t;
  result.history.candidates.push_back(
      evaluate_candidate(initial_prompt, train_sets, victim, scorer, mode, 0));
  if (on_candidate) on_candidate(result.history.candidates.back());

  for (int i = 1; i <= budget_t; ++i) {
    AapCandidate& last = result.history.candidates.back();
    last.analysis = analyze_failures(last, templates, rewriter);
    std::optional<double> predicted;
    PromptText next;
    try {
      next = generate_candidate(
          result.history, last.analysis, templates, rewriter, &predicted,
          generator_seed ? std::optional<int>(*generator_seed + 16 * i)
                         : std::nullopt);
    } catch (const DuplicationError& e) {
      result.ended_early = true;
      result.end_reason = e.what();
      break;
    }
    AapCandidate cand =
        evaluate_candidate(next, train_sets, victim, scorer, mode, i);
    cand.predicted_score = predicted;
    result.history.candidates.push_back(std::move(cand));
    if (on_candidate) on_candidate(result.history.candidates.back());
  }

  result.p0_star = result.history.best().prompt;
  return result;
}

}  // namespace promptforge
