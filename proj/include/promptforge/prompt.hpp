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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "promptforge/errors.hpp"
#include "promptforge/util.hpp"

namespace promptforge {

/// One word of a prompt plus the byte span it occupies in the raw text.
struct WordSpan {
  std::string text;
  std::size_t begin = 0;  // byte offset of first byte
  std::size_t end = 0;    // one past last byte

  bool operator==(const WordSpan&) const = default;
};

/// A system prompt as raw text plus a span-preserving word tokenization.
///
/// Words are maximal runs of non-whitespace bytes; punctuation stays
/// attached. Separators (including leading and trailing whitespace) are
/// preserved verbatim so that interleaving separators and words always
/// reconstructs the raw text exactly. Instances are immutable values;
/// edits return new objects.
class PromptText {
 public:
  PromptText() = default;

  static PromptText tokenize(std::string raw) {
    PromptText p;
    p.raw_ = std::move(raw);
    std::size_t i = 0;
    const std::string& s = p.raw_;
    std::size_t sep_start = 0;
    while (i < s.size()) {
      if (is_ascii_space(s[i])) {
        ++i;
        continue;
      }
      p.separators_.emplace_back(s.substr(sep_start, i - sep_start));
      std::size_t word_start = i;
      while (i < s.size() && !is_ascii_space(s[i])) ++i;
      p.words_.push_back(
          WordSpan{s.substr(word_start, i - word_start), word_start, i});
      sep_start = i;
    }
    p.separators_.emplace_back(s.substr(sep_start));
    return p;
  }

  const std::string& raw() const { return raw_; }
  std::size_t word_count() const { return words_.size(); }
  const std::vector<WordSpan>& words() const { return words_; }

  const WordSpan& word(std::size_t index) const {
    check_index(index);
    return words_[index];
  }

  /// Separator `i` precedes word `i`; separator `word_count()` is the
  /// trailing whitespace. There are always word_count()+1 separators.
  const std::string& separator(std::size_t index) const {
    if (index >= separators_.size())
      throw ContractError("separator index out of range");
    return separators_[index];
  }

  std::vector<std::string> word_texts() const {
    std::vector<std::string> out;
    out.reserve(words_.size());
    for (const auto& w : words_) out.push_back(w.text);
    return out;
  }

  /// Replaces the addressed word with `replacement` and re-tokenizes.
  /// An empty replacement deletes the word together with the following
  /// separator (the preceding one when the word is last). A replacement
  /// containing internal whitespace yields multiple words. All other
  /// words and separators are byte-identical in the result.
  PromptText replace_word(std::size_t index,
                          std::string_view replacement) const {
    check_index(index);
    if (replacement.empty()) return remove_word(index);
    const WordSpan& w = words_[index];
    std::string next = raw_.substr(0, w.begin);
    next.append(replacement);
    next.append(raw_.substr(w.end));
    return tokenize(std::move(next));
  }

  PromptText remove_word(std::size_t index) const {
    check_index(index);
    const WordSpan& w = words_[index];
    std::size_t erase_begin = w.begin;
    std::size_t erase_end = w.end;
    if (index + 1 < words_.size()) {
      erase_end = words_[index + 1].begin;  // word + following separator
    } else {
      erase_begin -= separators_[index].size();  // last word: preceding one
    }
    std::string next = raw_.substr(0, erase_begin);
    next.append(raw_.substr(erase_end));
    return tokenize(std::move(next));
  }

  bool operator==(const PromptText& other) const {
    return raw_ == other.raw_;
  }

 private:
  void check_index(std::size_t index) const {
    if (index >= words_.size())
      throw ContractError("word index " + std::to_string(index) +
                          " out of range (word count " +
                          std::to_string(words_.size()) + ")");
  }

  std::string raw_;
  std::vector<WordSpan> words_;
  std::vector<std::string> separators_;
};

inline PromptText tokenize_prompt(std::string raw) {
  return PromptText::tokenize(std::move(raw));
}

}  // namespace promptforge
