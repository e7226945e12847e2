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
#include <vector>

#include <json.hpp>

#include "promptforge/embedding.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/metrics.hpp"
#include "promptforge/oracle.hpp"
#include "promptforge/prompt.hpp"
#include "promptforge/query.hpp"
#include "promptforge/templates.hpp"

namespace promptforge {

inline std::size_t choices_for_format(AnswerFormat fmt) {
  switch (fmt) {
    case AnswerFormat::two_option: return 2;
    case AnswerFormat::four_option: return 4;
    default: return 0;
  }
}

/// Renders the user message for an item in the requested answer format.
/// Freeform sends the question verbatim; choice formats fill the
/// bundled template with the question and lettered options.
inline std::string render_question(const QueryItem& item, AnswerFormat fmt,
                                   const std::string& choice_template) {
  if (fmt == AnswerFormat::freeform) return item.question;
  std::size_t n = choices_for_format(fmt);
  if (item.choices.size() < n)
    throw ConfigError("item " + item.id + " has " +
                      std::to_string(item.choices.size()) +
                      " choices but format " + to_string(fmt) + " needs " +
                      std::to_string(n));
  std::string block;
  for (std::size_t i = 0; i < n; ++i) {
    block += static_cast<char>('A' + i);
    block += ". " + item.choices[i];
    if (i + 1 < n) block += "\n";
  }
  return fill_template(choice_template,
                       {{"question", item.question}, {"choices", block}});
}

/// First standalone A-D token in the output, or -1.
inline int extract_choice_letter(const std::string& output,
                                 std::size_t n_choices) {
  for (const auto& token : split_whitespace(output)) {
    std::size_t b = 0;
    std::size_t e = token.size();
    while (b < e && is_ascii_punct(token[b])) ++b;
    while (e > b && is_ascii_punct(token[e - 1])) --e;
    if (e - b != 1) continue;
    char c = lower_ascii(token[b]);
    if (c >= 'a' && c < static_cast<char>('a' + n_choices))
      return c - 'a';
  }
  return -1;
}

/// Index of the choice closest to the output in embedding space
/// (highest cosine; ties go to the lowest index). Returns -1 when the
/// output is empty or carries no tokens, the designated "no answer"
/// outcome.
inline int map_freeform_to_choice(const std::string& output,
                                  const std::vector<std::string>& choices,
                                  const EmbeddingProvider& embedder) {
  if (choices.empty())
    throw ContractError("map_freeform_to_choice requires choices");
  std::vector<double> out_vec;
  try {
    out_vec = embedder.embed(output);
  } catch (const DegenerateInputError&) {
    return -1;
  }
  int best = 0;
  double best_cos = -2.0;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    double c = cosine(out_vec, embedder.embed(choices[i]));
    if (c > best_cos) {
      best_cos = c;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// Everything needed to turn (item, model output) into an ItemOutcome
/// and to build victim requests. Pure given its providers.
struct ItemScorer {
  const EmbeddingProvider* embedder = nullptr;
  std::string choice_template;
  DecodeParams decode;

  ChatRequest make_request(const std::string& prompt_raw,
                           const QueryItem& item, AnswerFormat fmt) const {
    ChatRequest req;
    req.system_prompt = prompt_raw;
    req.user_message = render_question(item, fmt, choice_template);
    req.decode = decode;
    return req;
  }

  /// Freeform outputs score directly against the gold list; choice
  /// formats first reduce the output to a selected option (letter token,
  /// falling back to embedding distance), then take EM on the selection
  /// and F1 on the selected option text.
  ItemOutcome score(const QueryItem& item, AnswerFormat fmt,
                    const std::string& output) const {
    ItemOutcome o;
    o.item_id = item.id;
    o.model_output = output;
    if (fmt == AnswerFormat::freeform) {
      F1Em r = best_over_golds(output, item.gold_answers);
      o.f1 = r.f1;
      o.em = r.em;
    } else {
      std::size_t n = choices_for_format(fmt);
      if (item.choices.size() < n)
        throw ConfigError("item " + item.id + " lacks choices for format " +
                          to_string(fmt));
      std::vector<std::string> rendered(item.choices.begin(),
                                        item.choices.begin() + n);
      int gold_index = -1;
      for (std::size_t i = 0; i < rendered.size() && gold_index < 0; ++i)
        for (const auto& g : item.gold_answers)
          if (exact_match(rendered[i], g)) {
            gold_index = static_cast<int>(i);
            break;
          }
      if (gold_index < 0)
        throw ConfigError("item " + item.id +
                          ": gold answer not among the rendered choices");
      int selected = extract_choice_letter(output, n);
      if (selected < 0 && embedder)
        selected = map_freeform_to_choice(output, rendered, *embedder);
      if (selected >= 0) {
        o.em = selected == gold_index ? 1 : 0;
        double best_f1 = 0.0;
        for (const auto& g : item.gold_answers)
          best_f1 = std::max(best_f1, token_f1(rendered[selected], g));
        o.f1 = best_f1;
      }
    }
    o.indicator = indicator_from_f1(o.f1);
    return o;
  }
};

/// Outcome lists for one prompt over one pair of item lists, with the
/// loss surrogate computed from them.
struct EvalOutcomes {
  std::vector<ItemOutcome> benign;
  std::vector<ItemOutcome> target;
  LossBreakdown loss;

  double benign_f1_mean() const { return detail::mean_f1(benign); }
  double target_indicator_rate() const { return detail::mean_indicator(target); }
};

/// Queries the victim for every item and scores the outputs. With
/// propagate_errors, the first oracle failure aborts with the item id
/// attached; otherwise failed items are kept, flagged, and scored 0.
inline EvalOutcomes evaluate_outcomes(
    const PromptText& prompt, const std::vector<const QueryItem*>& benigns,
    const std::vector<const QueryItem*>& targets, Oracle& victim,
    const ItemScorer& scorer, AttackMode mode,
    std::optional<AnswerFormat> format_override = std::nullopt,
    bool propagate_errors = true) {
  if (benigns.empty() || targets.empty())
    throw ContractError("evaluate_outcomes requires non-empty item lists");

  std::vector<const QueryItem*> all;
  all.insert(all.end(), benigns.begin(), benigns.end());
  all.insert(all.end(), targets.begin(), targets.end());

  std::vector<ChatRequest> requests;
  requests.reserve(all.size());
  std::vector<AnswerFormat> formats;
  formats.reserve(all.size());
  for (const QueryItem* item : all) {
    AnswerFormat fmt = format_override.value_or(item->format);
    formats.push_back(fmt);
    requests.push_back(scorer.make_request(prompt.raw(), *item, fmt));
  }

  std::vector<Oracle::BatchResult> results = victim.batch_query(requests);

  EvalOutcomes out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const QueryItem* item = all[i];
    ItemOutcome outcome;
    if (results[i].ok) {
      outcome = scorer.score(*item, formats[i], results[i].response.text);
    } else if (propagate_errors) {
      throw OracleError(OracleError::Kind::network,
                        "item " + item->id + ": " + results[i].error);
    } else {
      outcome.item_id = item->id;
      outcome.error = true;
      outcome.error_message = results[i].error;
    }
    (item->role == Role::benign ? out.benign : out.target)
        .push_back(std::move(outcome));
  }
  out.loss = joint_loss(out.benign, out.target, mode);
  return out;
}

/// Aggregate results for one answer format.
struct FormatReport {
  AnswerFormat format = AnswerFormat::freeform;
  AggregateMetrics aggregates;
  std::vector<ItemOutcome> per_item_benign;
  std::vector<ItemOutcome> per_item_malicious;
};

/// Evaluates a prompt on the eval splits in the requested format. The
/// requested format may differ from the items' native one; that is the
/// transfer evaluation (same ids and golds, different rendering).
inline FormatReport evaluate_prompt(const PromptText& prompt,
                                    const QuerySet& qs, AnswerFormat fmt,
                                    Oracle& victim, const ItemScorer& scorer,
                                    AttackMode mode) {
  auto benigns = qs.eval_benigns();
  auto targets = qs.eval_targets();
  if (benigns.empty() || targets.empty())
    throw ContractError("evaluate_prompt: empty eval split");
  EvalOutcomes outcomes =
      evaluate_outcomes(prompt, benigns, targets, victim, scorer, mode, fmt,
                        /*propagate_errors=*/false);
  FormatReport report;
  report.format = fmt;
  report.aggregates = aggregate(outcomes.benign, outcomes.target);
  report.per_item_benign = std::move(outcomes.benign);
  report.per_item_malicious = std::move(outcomes.target);
  return report;
}

/// Mean pairwise cosine between two question sets (leakage audit).
inline double audit_overlap(const std::vector<const QueryItem*>& left,
                            const std::vector<const QueryItem*>& right,
                            const EmbeddingProvider& embedder) {
  if (left.empty() || right.empty())
    throw ContractError("audit_overlap requires non-empty sets");
  std::vector<std::vector<double>> rv;
  rv.reserve(right.size());
  for (const QueryItem* r : right) rv.push_back(embedder.embed(r->question));
  double sum = 0.0;
  for (const QueryItem* l : left) {
    std::vector<double> lv = embedder.embed(l->question);
    for (const auto& r : rv) sum += cosine(lv, r);
  }
  return sum / static_cast<double>(left.size() * right.size());
}

inline nlohmann::json item_outcome_to_json(const ItemOutcome& o) {
  return nlohmann::json{{"item_id", o.item_id},
                        {"model_output", o.model_output},
                        {"f1", o.f1},
                        {"em", o.em},
                        {"indicator", o.indicator},
                        {"error", o.error},
                        {"error_message", o.error_message}};
}

inline ItemOutcome item_outcome_from_json(const nlohmann::json& j) {
  ItemOutcome o;
  o.item_id = j.at("item_id").get<std::string>();
  o.model_output = j.at("model_output").get<std::string>();
  o.f1 = j.at("f1").get<double>();
  o.em = j.at("em").get<int>();
  o.indicator = j.at("indicator").get<int>();
  o.error = j.at("error").get<bool>();
  o.error_message = j.at("error_message").get<std::string>();
  return o;
}

inline nlohmann::json aggregates_to_json(const AggregateMetrics& m) {
  return nlohmann::json{
      {"f1_benign", m.f1_benign},       {"em_benign", m.em_benign},
      {"f1_malicious", m.f1_malicious}, {"em_malicious", m.em_malicious},
      {"delta_f1", m.delta_f1},         {"delta_em", m.delta_em},
      {"psi_f1", m.psi_f1},             {"psi_em", m.psi_em}};
}

inline AggregateMetrics aggregates_from_json(const nlohmann::json& j) {
  AggregateMetrics m;
  m.f1_benign = j.at("f1_benign").get<double>();
  m.em_benign = j.at("em_benign").get<double>();
  m.f1_malicious = j.at("f1_malicious").get<double>();
  m.em_malicious = j.at("em_malicious").get<double>();
  m.delta_f1 = j.at("delta_f1").get<double>();
  m.delta_em = j.at("delta_em").get<double>();
  m.psi_f1 = j.at("psi_f1").get<double>();
  m.psi_em = j.at("psi_em").get<double>();
  return m;
}

inline nlohmann::json format_report_to_json(const FormatReport& r) {
  nlohmann::json benign = nlohmann::json::array();
  for (const auto& o : r.per_item_benign)
    benign.push_back(item_outcome_to_json(o));
  nlohmann::json malicious = nlohmann::json::array();
  for (const auto& o : r.per_item_malicious)
    malicious.push_back(item_outcome_to_json(o));
  return nlohmann::json{{"format", to_string(r.format)},
                        {"aggregates", aggregates_to_json(r.aggregates)},
                        {"per_item_benign", benign},
                        {"per_item_malicious", malicious}};
}

inline FormatReport format_report_from_json(const nlohmann::json& j) {
  FormatReport r;
  r.format = format_from_string(j.at("format").get<std::string>());
  r.aggregates = aggregates_from_json(j.at("aggregates"));
  for (const auto& o : j.at("per_item_benign"))
    r.per_item_benign.push_back(item_outcome_from_json(o));
  for (const auto& o : j.at("per_item_malicious"))
    r.per_item_malicious.push_back(item_outcome_from_json(o));
  return r;
}

}  // namespace promptforge
