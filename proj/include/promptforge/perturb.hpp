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

#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/utf8.hpp"
#include "promptforge/util.hpp"

namespace promptforge {

/// US-QWERTY adjacency used to simulate slipped-finger typos.
class KeyboardMap {
 public:
  static KeyboardMap load(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("keyboard map " + path + ": " + e.what());
    }
    KeyboardMap m;
    for (const auto& [key, value] : j.items()) {
      if (key.size() != 1)
        throw ConfigError("keyboard map keys must be single characters: " + key);
      std::string neighbors;
      for (const auto& n : value) {
        std::string s = n.get<std::string>();
        if (s.size() != 1)
          throw ConfigError("keyboard neighbors must be single characters");
        neighbors += s;
      }
      m.adjacent_[key[0]] = neighbors;
    }
    return m;
  }

  /// Neighbors of a character, empty when the map has no entry. Lookup
  /// is case-folded; substitutes preserve the original case.
  std::string neighbors(const std::string& scalar) const {
    if (scalar.size() != 1) return {};
    char c = scalar[0];
    bool upper = c >= 'A' && c <= 'Z';
    auto it = adjacent_.find(lower_ascii(c));
    if (it == adjacent_.end()) return {};
    if (!upper) return it->second;
    std::string out = it->second;
    for (char& n : out)
      if (n >= 'a' && n <= 'z') n = static_cast<char>(n - 'a' + 'A');
    return out;
  }

  bool empty() const { return adjacent_.empty(); }

 private:
  std::map<char, std::string> adjacent_;
};

/// Flat synonym table: one line per group, "headword TAB lemma,lemma".
/// Multiword lemmas are stored underscore-joined so a substitution never
/// introduces whitespace.
class SynonymLexicon {
 public:
  static SynonymLexicon load(const std::string& path) {
    SynonymLexicon lex;
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
                          ": expected 'headword<TAB>lemma,lemma'");
      std::string head = to_lower_ascii(trim(t.substr(0, tab)));
      std::vector<std::string> lemmas;
      std::string rest = t.substr(tab + 1);
      std::size_t pos = 0;
      while (pos <= rest.size()) {
        std::size_t comma = rest.find(',', pos);
        std::string lemma = trim(rest.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (!lemma.empty()) lemmas.push_back(to_lower_ascii(lemma));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      lex.groups_[head] = std::move(lemmas);
    }
    lex.build_reverse();
    return lex;
  }

  std::vector<std::string> lookup(const std::string& word) const {
    std::string key = to_lower_ascii(word);
    auto it = groups_.find(key);
    if (it == groups_.end()) return {};
    std::vector<std::string> out;
    for (const auto& lemma : it->second)
      if (lemma != key) out.push_back(lemma);
    return out;
  }

  /// Headword for a lemma, used by the canonicalizing sanitizer. Lemmas
  /// that are themselves headwords are excluded so canonicalization is
  /// idempotent.
  std::optional<std::string> reverse_lookup(const std::string& lemma) const {
    auto it = reverse_.find(to_lower_ascii(lemma));
    if (it == reverse_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return groups_.size(); }

 private:
  void build_reverse() {
    for (const auto& [head, lemmas] : groups_)
      for (const auto& lemma : lemmas) {
        if (lemma == head || groups_.count(lemma)) continue;
        reverse_.emplace(lemma, head);
      }
  }

  std::unordered_map<std::string, std::vector<std::string>> groups_;
  std::unordered_map<std::string, std::string> reverse_;
};

enum class PerturbKind { split, swap, keyboard, del, synonym };

inline std::string to_string(PerturbKind k) {
  switch (k) {
    case PerturbKind::split: return "split";
    case PerturbKind::swap: return "swap";
    case PerturbKind::keyboard: return "keyboard";
    case PerturbKind::del: return "delete";
    default: return "synonym";
  }
}

inline PerturbKind perturb_kind_from_string(const std::string& s) {
  if (s == "split") return PerturbKind::split;
  if (s == "swap") return PerturbKind::swap;
  if (s == "keyboard") return PerturbKind::keyboard;
  if (s == "delete") return PerturbKind::del;
  if (s == "synonym") return PerturbKind::synonym;
  throw ConfigError("unknown perturbation kind: " + s);
}

/// One proposed word edit.
struct PerturbationCandidate {
  PerturbKind kind = PerturbKind::split;
  int word_index = 0;
  std::string original;
  std::string replacement;
};

/// Inserts one space at each interior position; the character sequence
/// is preserved.
inline std::vector<std::string> perturb_split(const std::string& word) {
  std::vector<std::string> scalars = utf8_scalars(word);
  std::vector<std::string> out;
  if (scalars.size() < 2) return out;
  for (std::size_t i = 1; i < scalars.size(); ++i) {
    std::string cand;
    for (std::size_t j = 0; j < scalars.size(); ++j) {
      if (j == i) cand += ' ';
      cand += scalars[j];
    }
    out.push_back(std::move(cand));
  }
  return out;
}

/// Swaps two adjacent interior characters; first and last stay fixed.
inline std::vector<std::string> perturb_swap(const std::string& word) {
  std::vector<std::string> scalars = utf8_scalars(word);
  std::vector<std::string> out;
  if (scalars.size() < 4) return out;
  for (std::size_t i = 1; i + 2 < scalars.size(); ++i) {
    std::vector<std::string> copy = scalars;
    std::swap(copy[i], copy[i + 1]);
    std::string cand = join_scalars(copy);
    if (cand != word) out.push_back(std::move(cand));
  }
  return out;
}

/// Replaces one character with a keyboard-adjacent one. Positions
/// without an adjacency entry yield no candidates.
inline std::vector<std::string> perturb_keyboard(const std::string& word,
                                                 const KeyboardMap& keyboard) {
  std::vector<std::string> scalars = utf8_scalars(word);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    std::string neighbors = keyboard.neighbors(scalars[i]);
    for (char n : neighbors) {
      std::vector<std::string> copy = scalars;
      copy[i] = std::string(1, n);
      std::string cand = join_scalars(copy);
      if (cand != word) out.push_back(std::move(cand));
    }
  }
  return out;
}

/// Removes one character.
inline std::vector<std::string> perturb_delete(const std::string& word) {
  std::vector<std::string> scalars = utf8_scalars(word);
  std::vector<std::string> out;
  if (scalars.size() < 2) return out;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    std::string cand;
    for (std::size_t j = 0; j < scalars.size(); ++j)
      if (j != i) cand += scalars[j];
    out.push_back(std::move(cand));
  }
  return out;
}

/// All lexicon lemmas for the lowercased word, excluding the word
/// itself.
inline std::vector<std::string> perturb_synonym(const std::string& word,
                                                const SynonymLexicon& lexicon) {
  return lexicon.lookup(word);
}

}  // namespace promptforge
