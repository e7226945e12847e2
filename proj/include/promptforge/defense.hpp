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
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "promptforge/embedding.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/harness.hpp"
#include "promptforge/oracle.hpp"
#include "promptforge/perplexity.hpp"
#include "promptforge/perturb.hpp"
#include "promptforge/prompt.hpp"
#include "promptforge/stealth.hpp"
#include "promptforge/templates.hpp"

namespace promptforge {

enum class SanitizeMode { polish, paraphrase };

inline std::string to_string(SanitizeMode m) {
  return m == SanitizeMode::polish ? "polish" : "paraphrase";
}

/// Word-level Levenshtein distance.
inline int word_levenshtein(const std::vector<std::string>& a,
                            const std::vector<std::string>& b) {
  std::vector<int> prev(b.size() + 1);
  std::vector<int> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct SanitizationResult {
  PromptText original;
  PromptText sanitized;
  SanitizeMode mode = SanitizeMode::polish;
  int edit_distance_words = 0;
};

/// Rewrites a suspect prompt at the requested strength.
class Sanitizer {
 public:
  virtual ~Sanitizer() = default;
  virtual std::string rewrite(const std::string& prompt_raw,
                              SanitizeMode mode) = 0;
};

/// LLM-backed sanitization: sends the bundled template as system prompt
/// and the suspect prompt as the user message, at temperature 0.
class LlmSanitizer : public Sanitizer {
 public:
  LlmSanitizer(Oracle& oracle, std::string polish_template,
               std::string paraphrase_template, int max_tokens = 1024)
      : oracle_(oracle),
        polish_template_(std::move(polish_template)),
        paraphrase_template_(std::move(paraphrase_template)),
        max_tokens_(max_tokens) {}

  std::string rewrite(const std::string& prompt_raw,
                      SanitizeMode mode) override {
    ChatRequest req;
    req.system_prompt =
        mode == SanitizeMode::polish ? polish_template_ : paraphrase_template_;
    req.user_message = prompt_raw;
    req.decode.temperature = 0.0;
    req.decode.max_tokens = max_tokens_;
    return oracle_.query(req).text;
  }

 private:
  Oracle& oracle_;
  std::string polish_template_;
  std::string paraphrase_template_;
  int max_tokens_;
};

/// Deterministic dictionary repairer for offline experiments.
///
/// Polish joins adjacent word pairs whose concatenation is a known
/// word ("know ledge" -> "knowledge") and fixes typos listed in the
/// repair table ("geenral" -> "general"), repeating until nothing
/// changes. Paraphrase additionally canonicalizes known synonym lemmas
/// back to their headword ("volition" -> "will"). Both modes are
/// idempotent.
class MockSanitizer : public Sanitizer {
 public:
  MockSanitizer(std::set<std::string> wordlist,
                std::unordered_map<std::string, std::string> typo_repairs,
                const SynonymLexicon* lexicon = nullptr)
      : wordlist_(std::move(wordlist)),
        typo_repairs_(std::move(typo_repairs)),
        lexicon_(lexicon) {}

  static std::set<std::string> load_wordlist(const std::string& path) {
    std::set<std::string> out;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
      std::string w = to_lower_ascii(trim(line));
      if (!w.empty() && w[0] != '#') out.insert(w);
    }
    return out;
  }

  static std::unordered_map<std::string, std::string> load_typo_table(
      const std::string& path) {
    std::unordered_map<std::string, std::string> out;
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      std::size_t tab = t.find('\t');
      if (tab == std::string::npos)
        throw ConfigError(path + " line " + std::to_string(lineno) +
                          ": expected 'typo<TAB>correction'");
      out[to_lower_ascii(trim(t.substr(0, tab)))] =
          to_lower_ascii(trim(t.substr(tab + 1)));
    }
    return out;
  }

  std::string rewrite(const std::string& prompt_raw,
                      SanitizeMode mode) override {
    PromptText p = tokenize_prompt(prompt_raw);
    // Each pass applies one repair; iterate to the fixpoint.
    long max_passes = static_cast<long>(p.word_count()) * 8 + 64;
    for (long pass = 0; pass < max_passes; ++pass) {
      bool changed = join_pass(p) || typo_pass(p);
      if (mode == SanitizeMode::paraphrase) changed = synonym_pass(p) || changed;
      if (!changed) break;
    }
    return p.raw();
  }

 private:
  // A word split by leading/trailing punctuation: "core" plus the
  // untouched affixes.
  struct CoreWord {
    std::string prefix, core, suffix;
  };

  static CoreWord split_core(const std::string& word) {
    std::size_t b = 0;
    std::size_t e = word.size();
    while (b < e && is_ascii_punct(word[b])) ++b;
    while (e > b && is_ascii_punct(word[e - 1])) --e;
    return CoreWord{word.substr(0, b), word.substr(b, e - b), word.substr(e)};
  }

  static std::string preserve_case(const std::string& original,
                                   std::string replacement) {
    if (!original.empty() && !replacement.empty() && original[0] >= 'A' &&
        original[0] <= 'Z' && replacement[0] >= 'a' && replacement[0] <= 'z')
      replacement[0] = static_cast<char>(replacement[0] - 'a' + 'A');
    return replacement;
  }

  bool join_pass(PromptText& p) const {
    for (std::size_t i = 0; i + 1 < p.word_count(); ++i) {
      CoreWord left = split_core(p.word(i).text);
      CoreWord right = split_core(p.word(i + 1).text);
      if (left.core.empty() || right.core.empty() || !left.suffix.empty() ||
          !right.prefix.empty())
        continue;
      std::string joined = to_lower_ascii(left.core + right.core);
      if (!wordlist_.count(joined)) continue;
      std::string merged =
          left.prefix + left.core + right.core + right.suffix;
      p = p.replace_word(i, merged).remove_word(i + 1);
      return true;
    }
    return false;
  }

  bool typo_pass(PromptText& p) const {
    for (std::size_t i = 0; i < p.word_count(); ++i) {
      CoreWord w = split_core(p.word(i).text);
      auto it = typo_repairs_.find(to_lower_ascii(w.core));
      if (it == typo_repairs_.end()) continue;
      std::string fixed = preserve_case(w.core, it->second);
      if (w.prefix + fixed + w.suffix == p.word(i).text) continue;
      p = p.replace_word(i, w.prefix + fixed + w.suffix);
      return true;
    }
    return false;
  }

  bool synonym_pass(PromptText& p) const {
    if (!lexicon_) return false;
    for (std::size_t i = 0; i < p.word_count(); ++i) {
      CoreWord w = split_core(p.word(i).text);
      auto head = lexicon_->reverse_lookup(w.core);
      if (!head) continue;
      std::string fixed = preserve_case(w.core, *head);
      if (w.prefix + fixed + w.suffix == p.word(i).text) continue;
      p = p.replace_word(i, w.prefix + fixed + w.suffix);
      return true;
    }
    return false;
  }

  std::set<std::string> wordlist_;
  std::unordered_map<std::string, std::string> typo_repairs_;
  const SynonymLexicon* lexicon_;
};

inline SanitizationResult sanitize(const PromptText& prompt, SanitizeMode mode,
                                   Sanitizer& sanitizer) {
  std::string rewritten = sanitizer.rewrite(prompt.raw(), mode);
  if (trim(rewritten).empty())
    throw Error("sanitizer produced an empty rewrite");
  SanitizationResult result;
  result.original = prompt;
  result.sanitized = tokenize_prompt(rewritten);
  result.mode = mode;
  result.edit_distance_words = word_levenshtein(
      prompt.word_texts(), result.sanitized.word_texts());
  return result;
}

/// One filter's decision; reproducible from score and threshold.
struct DetectionVerdict {
  std::string filter_name;
  bool flagged = false;
  double score = 0.0;
  double threshold = 0.0;
};

inline DetectionVerdict detect_perplexity(const PromptText& prompt, double tau,
                                          const PerplexityScorer& scorer) {
  DetectionVerdict v;
  v.filter_name = "perplexity";
  v.score = scorer.perplexity(prompt.raw());
  v.threshold = tau;
  v.flagged = v.score > tau;  // strict: exactly tau passes
  return v;
}

inline DetectionVerdict detect_similarity(
    const PromptText& prompt, const std::vector<const QueryItem*>& targets,
    double delta, const EmbeddingProvider& embedder) {
  DetectionVerdict v;
  v.filter_name = "similarity";
  v.score = similarity_to_targets(prompt, targets, embedder).first;
  v.threshold = delta;
  v.flagged = v.score > delta;
  return v;
}

/// Asks an LLM judge for a one-token MALICIOUS/BENIGN verdict. Output
/// that conforms to neither token counts as not-flagged; the deviation
/// is reported through `warning` so it can be logged.
inline DetectionVerdict detect_judge(const PromptText& prompt, Oracle& judge,
                                     const std::string& judge_template,
                                     std::string* warning = nullptr,
                                     int max_tokens = 8) {
  ChatRequest req;
  req.system_prompt = judge_template;
  req.user_message = prompt.raw();
  req.decode.temperature = 0.0;
  req.decode.max_tokens = max_tokens;
  std::string reply = judge.query(req).text;

  DetectionVerdict v;
  v.filter_name = "judge";
  v.threshold = 0.5;
  std::vector<std::string> tokens = split_whitespace(reply);
  std::string first;
  if (!tokens.empty()) {
    for (char c : tokens.front())
      if (!is_ascii_punct(c)) first += lower_ascii(c);
  }
  if (first == "malicious") {
    v.flagged = true;
    v.score = 1.0;
  } else if (first == "benign") {
    v.flagged = false;
    v.score = 0.0;
  } else {
    v.flagged = false;
    v.score = 0.0;
    if (warning) *warning = "non-conforming judge verdict: " + reply;
  }
  return v;
}

/// Before/after comparison of one sanitization mode on identical eval
/// splits and format.
struct PersistenceReport {
  SanitizationResult sanitization;
  FormatReport before;
  FormatReport after;
};

inline PersistenceReport measure_persistence(
    const PromptText& poisoned, SanitizeMode mode, Sanitizer& sanitizer,
    const QuerySet& qs, AnswerFormat fmt, Oracle& victim,
    const ItemScorer& scorer, AttackMode attack_mode) {
  PersistenceReport report;
  report.before = evaluate_prompt(poisoned, qs, fmt, victim, scorer, attack_mode);
  report.sanitization = sanitize(poisoned, mode, sanitizer);
  report.after = evaluate_prompt(report.sanitization.sanitized, qs, fmt, victim,
                                 scorer, attack_mode);
  return report;
}

}  // namespace promptforge
