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
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "promptforge/harness.hpp"
#include "promptforge/metrics.hpp"
#include "promptforge/oracle.hpp"
#include "promptforge/perturb.hpp"
#include "promptforge/prompt.hpp"
#include "promptforge/query.hpp"

namespace promptforge {

struct ImportanceEntry {
  int word_index = 0;
  std::string word;
  double importance = 0.0;
};

/// Leave-one-out importance per word, sorted by descending importance
/// with index order breaking ties.
struct ImportanceTable {
  std::vector<ImportanceEntry> entries;
};

/// Importance of word j is the loss increase caused by keeping it:
/// L(p) - L(p with word j removed). Positive means the word currently
/// helps the attack objective; negative means removal would hurt.
inline ImportanceTable importance_rank(const PromptText& prompt,
                                       const QuerySet& train_sets,
                                       Oracle& victim, const ItemScorer& scorer,
                                       AttackMode mode,
                                       const LossBreakdown* base = nullptr) {
  if (prompt.word_count() == 0)
    throw ContractError("importance_rank requires a non-empty prompt");
  auto benigns = train_sets.train_benigns();
  auto targets = train_sets.train_targets();
  LossBreakdown base_loss =
      base ? *base
           : evaluate_outcomes(prompt, benigns, targets, victim, scorer, mode)
                 .loss;
  ImportanceTable table;
  table.entries.reserve(prompt.word_count());
  for (std::size_t j = 0; j < prompt.word_count(); ++j) {
    PromptText reduced = prompt.remove_word(j);
    double reduced_loss =
        evaluate_outcomes(reduced, benigns, targets, victim, scorer, mode)
            .loss.l_joint;
    table.entries.push_back(ImportanceEntry{
        static_cast<int>(j), prompt.word(j).text,
        base_loss.l_joint - reduced_loss});
  }
  std::stable_sort(table.entries.begin(), table.entries.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) {
                     return a.importance > b.importance;
                   });
  return table;
}

struct Stage2Config {
  int max_perturbations_m = 0;
  int success_threshold_k = 1;
  int candidates_per_kind_c = 5;
  double benign_floor = 0.8;
  AttackMode mode = AttackMode::targeted;
  std::uint64_t seed = 0;
};

/// Search state carried through (and checkpointed during) the greedy
/// loop.
struct AttackState {
  PromptText prompt;
  LossBreakdown loss;
  std::vector<PerturbationCandidate> accepted_edits;
  int perturbations_tried_m = 0;
  int budget_m = 0;
  int success_threshold_k = 0;
  double baseline_benign_f1 = 0.0;
  bool success = false;
  EvalOutcomes outcomes;  // outcomes of `prompt` on the train splits
};

namespace detail {

inline bool is_pure_punct(const std::string& word) {
  for (char c : word)
    if (!is_ascii_punct(c)) return false;
  return !word.empty();
}

/// Keeps at most `limit` enumeration entries, sampling without
/// replacement but preserving enumeration order.
inline std::vector<std::string> sample_candidates(std::vector<std::string> all,
                                                  int limit,
                                                  std::mt19937_64& rng) {
  if (static_cast<int>(all.size()) <= limit) return all;
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < limit; ++i) {
    std::uniform_int_distribution<std::size_t> pick(
        static_cast<std::size_t>(i), idx.size() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(std::move(all[i]));
  return out;
}

}  // namespace detail

/// Enumerates up to C candidates per operator for one word, in the fixed
/// operator order split, swap, keyboard, delete, synonym. One-character
/// and pure-punctuation words skip the character operators but still get
/// synonym lookups.
inline std::vector<PerturbationCandidate> enumerate_perturbations(
    const PromptText& prompt, int word_index, const KeyboardMap& keyboard,
    const SynonymLexicon& lexicon, int candidates_per_kind,
    std::mt19937_64& rng) {
  const std::string& word =
      prompt.word(static_cast<std::size_t>(word_index)).text;
  bool char_edits_ok =
      utf8_scalars(word).size() > 1 && !detail::is_pure_punct(word);

  std::vector<PerturbationCandidate> out;
  auto add = [&](PerturbKind kind, std::vector<std::string> candidates) {
    candidates =
        detail::sample_candidates(std::move(candidates), candidates_per_kind, rng);
    for (auto& replacement : candidates)
      out.push_back(PerturbationCandidate{kind, word_index, word,
                                          std::move(replacement)});
  };
  if (char_edits_ok) {
    add(PerturbKind::split, perturb_split(word));
    add(PerturbKind::swap, perturb_swap(word));
    add(PerturbKind::keyboard, perturb_keyboard(word, keyboard));
    add(PerturbKind::del, perturb_delete(word));
  }
  add(PerturbKind::synonym, perturb_synonym(word, lexicon));
  return out;
}

struct BestPerturbation {
  std::optional<PerturbationCandidate> candidate;
  LossBreakdown loss;
  EvalOutcomes outcomes;
};

/// Evaluates every enumerated candidate for the word and returns the
/// strict loss minimizer. Ties resolve by operator order and then by
/// enumeration order; a word with no legal perturbations yields none.
inline BestPerturbation get_best_perturbation(
    const PromptText& prompt, int word_index, const QuerySet& train_sets,
    Oracle& victim, const ItemScorer& scorer, const Stage2Config& config,
    const KeyboardMap& keyboard, const SynonymLexicon& lexicon,
    std::mt19937_64& rng) {
  std::vector<PerturbationCandidate> candidates = enumerate_perturbations(
      prompt, word_index, keyboard, lexicon, config.candidates_per_kind_c, rng);
  BestPerturbation best;
  auto benigns = train_sets.train_benigns();
  auto targets = train_sets.train_targets();
  for (auto& cand : candidates) {
    PromptText edited = prompt.replace_word(
        static_cast<std::size_t>(word_index), cand.replacement);
    EvalOutcomes outcomes = evaluate_outcomes(edited, benigns, targets, victim,
                                              scorer, config.mode);
    if (!best.candidate || outcomes.loss.l_joint < best.loss.l_joint) {
      best.candidate = cand;
      best.loss = outcomes.loss;
      best.outcomes = std::move(outcomes);
    }
  }
  return best;
}

/// Success test on already-computed train outcomes: at least k targets
/// flipped (matching the adversarial answer in targeted mode, missing
/// the truth in untargeted mode) while benign F1 stays above the floor
/// relative to the pre-attack baseline.
inline bool success_check(const EvalOutcomes& outcomes, int k, AttackMode mode,
                          double benign_floor, double baseline_benign_f1) {
  int hits = 0;
  for (const auto& o : outcomes.target)
    hits += mode == AttackMode::targeted ? o.indicator : 1 - o.indicator;
  if (hits < k) return false;
  return outcomes.benign_f1_mean() >= benign_floor * baseline_benign_f1;
}

/// Querying overload: evaluates the prompt on the train splits first.
inline bool success_check(const PromptText& prompt, const QuerySet& train_sets,
                          int k, AttackMode mode, double benign_floor,
                          double baseline_benign_f1, Oracle& victim,
                          const ItemScorer& scorer) {
  EvalOutcomes outcomes =
      evaluate_outcomes(prompt, train_sets.train_benigns(),
                        train_sets.train_targets(), victim, scorer, mode);
  return success_check(outcomes, k, mode, benign_floor, baseline_benign_f1);
}

/// Greedy word-level refinement. The importance table is computed once
/// on the input prompt; words are visited in descending importance. An
/// edit is accepted only on strict loss improvement, success is checked
/// after each acceptance, and the loop stops after M word rounds.
///
/// An optional stealth gate can veto edits whose resulting prompt
/// violates the lexical constraints; an optional checkpoint hook runs
/// after every acceptance.
inline AttackState greedy_refine(
    const PromptText& p0_star, const QuerySet& train_sets,
    const Stage2Config& config, Oracle& victim, const ItemScorer& scorer,
    const KeyboardMap& keyboard, const SynonymLexicon& lexicon,
    double baseline_benign_f1,
    const std::function<void(const AttackState&)>& checkpoint = nullptr,
    const std::function<bool(const PromptText&)>& stealth_gate = nullptr) {
  if (config.max_perturbations_m < 0)
    throw ContractError("perturbation budget must be >= 0");
  std::mt19937_64 rng(config.seed);

  AttackState state;
  state.prompt = p0_star;
  state.budget_m = config.max_perturbations_m;
  state.success_threshold_k = config.success_threshold_k;
  state.baseline_benign_f1 = baseline_benign_f1;
  state.outcomes =
      evaluate_outcomes(p0_star, train_sets.train_benigns(),
                        train_sets.train_targets(), victim, scorer, config.mode);
  state.loss = state.outcomes.loss;
  state.success = success_check(state.outcomes, config.success_threshold_k,
                                config.mode, config.benign_floor,
                                baseline_benign_f1);
  if (state.success || config.max_perturbations_m == 0) return state;

  ImportanceTable table = importance_rank(p0_star, train_sets, victim, scorer,
                                          config.mode, &state.loss);

  // Accepted splits insert a word, shifting everything to their right;
  // this maps the table's original indices onto the current prompt.
  std::vector<int> current_index(p0_star.word_count());
  std::iota(current_index.begin(), current_index.end(), 0);

  for (const ImportanceEntry& entry : table.entries) {
    if (state.perturbations_tried_m >= config.max_perturbations_m) break;
    ++state.perturbations_tried_m;
    int idx = current_index[static_cast<std::size_t>(entry.word_index)];
    BestPerturbation best =
        get_best_perturbation(state.prompt, idx, train_sets, victim, scorer,
                              config, keyboard, lexicon, rng);
    if (!best.candidate) continue;
    if (best.loss.l_joint >= state.loss.l_joint) continue;  // strict only
    PromptText edited = state.prompt.replace_word(
        static_cast<std::size_t>(idx), best.candidate->replacement);
    if (stealth_gate && !stealth_gate(edited)) continue;
    int delta = static_cast<int>(edited.word_count()) -
                static_cast<int>(state.prompt.word_count());
    if (delta != 0)
      for (int& ci : current_index)
        if (ci > idx) ci += delta;
    state.prompt = std::move(edited);
    state.loss = best.loss;
    state.outcomes = std::move(best.outcomes);
    state.accepted_edits.push_back(*best.candidate);
    if (checkpoint) checkpoint(state);
    if (success_check(state.outcomes, config.success_threshold_k, config.mode,
                      config.benign_floor, baseline_benign_f1)) {
      state.success = true;
      return state;
    }
  }
  return state;
}

}  // namespace promptforge
