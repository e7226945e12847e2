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

#include <cmath>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>

#include "promptforge/errors.hpp"
#include "promptforge/util.hpp"

namespace promptforge {

/// Fluency scorer; lower means more fluent.
class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;
  virtual double perplexity(std::string_view text) const = 0;
};

/// Character-trigram language model with add-one smoothing, trained on a
/// plain-text corpus. The score is the per-character perplexity
/// exp(-mean log p), so it is length-normalized. Characters outside the
/// training alphabet map to a single unknown symbol; smoothing keeps
/// every probability positive.
class TrigramScorer : public PerplexityScorer {
 public:
  static TrigramScorer train_from_text(std::string_view corpus) {
    TrigramScorer m;
    for (char raw : corpus) m.alphabet_.insert(m.canon(raw));
    m.alphabet_.insert(kBoundary);
    m.vocab_size_ = m.alphabet_.size() + 1;  // +1 for unknown
    char a = kBoundary;
    char b = kBoundary;
    for (char raw : corpus) {
      char c = m.canon(raw);
      if (!m.alphabet_.count(c)) c = kUnknown;
      ++m.trigrams_[pack(a, b, c)];
      ++m.bigrams_[pack(a, b, 0)];
      a = b;
      b = c;
    }
    return m;
  }

  static TrigramScorer train_from_file(const std::string& path) {
    return train_from_text(read_text_file(path));
  }

  double perplexity(std::string_view text) const override {
    if (text.empty())
      throw DegenerateInputError("cannot score empty text");
    double log_sum = 0.0;
    char a = kBoundary;
    char b = kBoundary;
    for (char raw : text) {
      char c = canon(raw);
      if (!alphabet_.count(c)) c = kUnknown;
      auto tri = trigrams_.find(pack(a, b, c));
      auto bi = bigrams_.find(pack(a, b, 0));
      double num = 1.0 + (tri == trigrams_.end() ? 0 : tri->second);
      double den = static_cast<double>(vocab_size_) +
                   (bi == bigrams_.end() ? 0 : bi->second);
      log_sum += std::log(num / den);
      a = b;
      b = c;
    }
    return std::exp(-log_sum / static_cast<double>(text.size()));
  }

 private:
  static constexpr char kBoundary = '\x02';
  static constexpr char kUnknown = '\x1a';

  char canon(char c) const { return lower_ascii(c); }

  static std::uint32_t pack(char a, char b, char c) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(a)) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b)) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(c));
  }

  std::unordered_map<std::uint32_t, long> trigrams_;
  std::unordered_map<std::uint32_t, long> bigrams_;
  std::set<char> alphabet_;
  std::size_t vocab_size_ = 0;
};

}  // namespace promptforge
