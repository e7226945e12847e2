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
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/metrics.hpp"
#include "promptforge/util.hpp"

namespace promptforge {

enum class Role { target, benign };
enum class Split { train, eval };
enum class AnswerFormat { freeform, two_option, four_option };

inline std::string to_string(Role r) {
  return r == Role::target ? "target" : "benign";
}
inline std::string to_string(Split s) {
  return s == Split::train ? "train" : "eval";
}
inline std::string to_string(AnswerFormat f) {
  switch (f) {
    case AnswerFormat::freeform: return "freeform";
    case AnswerFormat::two_option: return "two_option";
    default: return "four_option";
  }
}

inline Role role_from_string(const std::string& s) {
  if (s == "target") return Role::target;
  if (s == "benign") return Role::benign;
  throw ConfigError("unknown role: " + s);
}
inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "eval") return Split::eval;
  throw ConfigError("unknown split: " + s);
}
inline AnswerFormat format_from_string(const std::string& s) {
  if (s == "freeform") return AnswerFormat::freeform;
  if (s == "two_option") return AnswerFormat::two_option;
  if (s == "four_option") return AnswerFormat::four_option;
  throw ConfigError("unknown format: " + s);
}

/// One question. For target items gold_answers holds the adversarial
/// answer in targeted mode and the ground truth in untargeted mode;
/// benign items always carry ground truths (possibly aliases).
struct QueryItem {
  std::string id;
  std::string question;
  std::vector<std::string> gold_answers;
  Role role = Role::benign;
  std::optional<Split> split;
  AnswerFormat format = AnswerFormat::freeform;
  std::vector<std::string> choices;

  void validate() const {
    if (id.empty()) throw ConfigError("query item with empty id");
    if (question.empty()) throw ConfigError("empty question in item " + id);
    if (gold_answers.empty())
      throw ConfigError("item " + id + " has no gold answers");
    if (format != AnswerFormat::freeform) {
      std::size_t needed = format == AnswerFormat::two_option ? 2 : 4;
      if (choices.size() < needed)
        throw ConfigError("item " + id + " needs at least " +
                          std::to_string(needed) + " choices");
      bool gold_listed = false;
      for (const auto& g : gold_answers)
        for (const auto& c : choices)
          if (exact_match(c, g)) gold_listed = true;
      if (!gold_listed)
        throw ConfigError("item " + id +
                          ": gold answer is not among the choices");
    }
  }
};

/// The disjoint target and benign question sets with their splits.
struct QuerySet {
  std::vector<QueryItem> targets;
  std::vector<QueryItem> benigns;

  void validate() const {
    if (targets.empty() || benigns.empty())
      throw ConfigError("query set needs at least one target and one benign item");
    std::set<std::string> ids;
    std::set<std::string> questions;
    auto check = [&](const QueryItem& item) {
      item.validate();
      if (!ids.insert(item.id).second)
        throw ConfigError("duplicate item id: " + item.id);
      if (!questions.insert(item.question).second)
        throw ConfigError("duplicate question text in item " + item.id);
    };
    for (const auto& t : targets) check(t);
    for (const auto& b : benigns) check(b);
  }

  /// Targeted mode requires exactly one adversarial answer per target.
  void validate_for_mode(AttackMode mode) const {
    validate();
    if (mode == AttackMode::targeted)
      for (const auto& t : targets)
        if (t.gold_answers.size() != 1)
          throw ConfigError("targeted mode: target item " + t.id +
                            " must carry exactly one adversarial answer");
  }

  std::vector<const QueryItem*> select(Role role,
                                       std::optional<Split> split) const {
    std::vector<const QueryItem*> out;
    const auto& list = role == Role::target ? targets : benigns;
    for (const auto& item : list)
      if (!split || item.split == split) out.push_back(&item);
    return out;
  }

  std::vector<const QueryItem*> train_targets() const {
    return select(Role::target, Split::train);
  }
  std::vector<const QueryItem*> eval_targets() const {
    return select(Role::target, Split::eval);
  }
  std::vector<const QueryItem*> train_benigns() const {
    return select(Role::benign, Split::train);
  }
  std::vector<const QueryItem*> eval_benigns() const {
    return select(Role::benign, Split::eval);
  }
};

inline QueryItem query_item_from_json(const nlohmann::json& j) {
  QueryItem item;
  item.id = j.at("id").get<std::string>();
  item.question = j.at("question").get<std::string>();
  item.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
  item.role = role_from_string(j.at("role").get<std::string>());
  if (j.contains("split") && !j.at("split").is_null())
    item.split = split_from_string(j.at("split").get<std::string>());
  item.format = format_from_string(j.at("format").get<std::string>());
  if (j.contains("choices") && !j.at("choices").is_null())
    item.choices = j.at("choices").get<std::vector<std::string>>();
  return item;
}

inline nlohmann::json query_item_to_json(const QueryItem& item) {
  nlohmann::json j{{"id", item.id},
                   {"question", item.question},
                   {"gold_answers", item.gold_answers},
                   {"role", to_string(item.role)},
                   {"format", to_string(item.format)}};
  j["split"] = item.split ? nlohmann::json(to_string(*item.split))
                          : nlohmann::json(nullptr);
  j["choices"] = item.choices.empty() ? nlohmann::json(nullptr)
                                      : nlohmann::json(item.choices);
  return j;
}

/// Reads a JSON Lines dataset (one item object per line).
inline QuerySet load_dataset(const std::string& path) {
  std::istringstream in(read_text_file(path));
  QuerySet qs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + " line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    QueryItem item;
    try {
      item = query_item_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + " line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    (item.role == Role::target ? qs.targets : qs.benigns)
        .push_back(std::move(item));
  }
  qs.validate();
  return qs;
}

inline void save_dataset(const QuerySet& qs, const std::string& path) {
  std::ostringstream out;
  for (const auto& t : qs.targets) out << query_item_to_json(t).dump() << "\n";
  for (const auto& b : qs.benigns) out << query_item_to_json(b).dump() << "\n";
  write_text_file(path, out.str());
}

/// Requested sizes for the seeded train/eval partition.
struct SplitSpec {
  int n_target_train = 0;
  int n_target_eval = 0;
  int n_benign_train = 0;
  int n_benign_eval = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_target_train < 1 || n_target_eval < 1 || n_benign_train < 1 ||
        n_benign_eval < 1)
      throw ConfigError("all split counts must be >= 1");
  }
};

/// Seeded shuffle followed by partition. Items beyond the requested
/// counts are dropped; insufficient items are an error naming the
/// deficit.
inline QuerySet make_splits(QuerySet qs, const SplitSpec& spec) {
  spec.validate();
  auto assign = [&](std::vector<QueryItem>& items, int n_train, int n_eval,
                    const char* what, std::uint64_t salt) {
    std::size_t need =
        static_cast<std::size_t>(n_train) + static_cast<std::size_t>(n_eval);
    if (items.size() < need)
      throw ConfigError(std::string("not enough ") + what + " items: need " +
                        std::to_string(need) + ", have " +
                        std::to_string(items.size()));
    std::mt19937_64 rng(spec.seed ^ salt);
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i < static_cast<std::size_t>(n_train))
        items[i].split = Split::train;
      else if (i < need)
        items[i].split = Split::eval;
    }
    items.resize(need);
  };
  assign(qs.targets, spec.n_target_train, spec.n_target_eval, "target",
         0x7461726765746cULL);
  assign(qs.benigns, spec.n_benign_train, spec.n_benign_eval, "benign",
         0x62656e69676eULL);
  qs.validate();
  return qs;
}

}  // namespace promptforge
