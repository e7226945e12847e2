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
#include <string>
#include <string_view>
#include <vector>

#include "promptforge/errors.hpp"
#include "promptforge/util.hpp"

namespace promptforge {

/// Text encoder producing unit-norm vectors of a fixed dimension.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dimension() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

inline double cosine(const std::vector<double>& a,
                     const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ContractError("cosine: dimension mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

/// Deterministic offline encoder: hashed bag-of-words. Tokens are
/// lowercased alphanumeric runs (bytes >= 0x80 count as letters so
/// non-ASCII words stay whole); each token increments one hash bucket
/// and the count vector is L2-normalized. Texts with no tokens are
/// rejected as degenerate rather than mapped to the zero vector.
class HashedBowEmbedder : public EmbeddingProvider {
 public:
  explicit HashedBowEmbedder(int dimension = 256) : dimension_(dimension) {
    if (dimension < 1) throw ContractError("embedding dimension must be >= 1");
  }

  int dimension() const override { return dimension_; }

  static std::vector<std::string> tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    };
    for (char c : text) {
      auto u = static_cast<unsigned char>(c);
      bool wordish = (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') ||
                     (u >= '0' && u <= '9') || u >= 0x80;
      if (wordish)
        cur.push_back(lower_ascii(c));
      else
        flush();
    }
    flush();
    return out;
  }

  std::vector<double> embed(std::string_view text) const override {
    std::vector<std::string> toks = tokens(text);
    if (toks.empty())
      throw DegenerateInputError("cannot embed text with no tokens");
    std::vector<double> v(static_cast<std::size_t>(dimension_), 0.0);
    for (const auto& t : toks)
      v[fnv1a64(t) % static_cast<std::uint64_t>(dimension_)] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }

 private:
  int dimension_;
};

}  // namespace promptforge
