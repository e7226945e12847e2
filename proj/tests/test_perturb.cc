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

#include "promptforge/perturb.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "gtest/gtest.h"
#include "test_util.hpp"

using namespace promptforge;

namespace {

KeyboardMap qwerty() {
  return KeyboardMap::load(pftest::data_path("keyboard_qwerty.json"));
}

SynonymLexicon lexicon() {
  return SynonymLexicon::load(pftest::data_path("synonyms.tsv"));
}

std::multiset<char> char_multiset(const std::string& s) {
  return {s.begin(), s.end()};
}

bool contains(const std::vector<std::string>& candidates,
              const std::string& needle) {
  return std::find(candidates.begin(), candidates.end(), needle) !=
         candidates.end();
}

std::string random_word(std::mt19937_64& rng) {
  static const std::string letters =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  std::size_t len = 1 + rng() % 12;
  std::string word;
  for (std::size_t i = 0; i < len; ++i)
    word += letters[rng() % letters.size()];
  return word;
}

}  // namespace

TEST(Split, PaperArtifactReachable) {
  EXPECT_TRUE(contains(perturb_split("knowledge"), "know ledge"));
}

TEST(Split, TwoLetterWordHasOnePossibility) {
  EXPECT_EQ(perturb_split("ab"), std::vector<std::string>{"a b"});
}

TEST(Split, SingleCharHasNoCandidates) {
  EXPECT_TRUE(perturb_split("a").empty());
}

TEST(Swap, PaperArtifactReachable) {
  EXPECT_TRUE(contains(perturb_swap("general"), "geenral"));
}

TEST(Swap, CompositionReachesHeavierScrambles) {
  // "historical" -> ... -> "hrstoiical" via repeated interior swaps
  std::string goal = "hrstoiical";
  std::set<std::string> visited{"historical"};
  std::set<std::string> frontier = visited;
  bool found = false;
  for (int depth = 0; depth < 8 && !found && !frontier.empty(); ++depth) {
    std::set<std::string> next;
    for (const auto& w : frontier)
      for (const auto& cand : perturb_swap(w)) {
        if (cand == goal) found = true;
        if (visited.insert(cand).second) next.insert(cand);
      }
    frontier = std::move(next);
  }
  EXPECT_TRUE(found);
}

TEST(Swap, ShortWordsHaveNoCandidates) {
  EXPECT_TRUE(perturb_swap("abc").empty());
  EXPECT_TRUE(perturb_swap("ab").empty());
}

TEST(Keyboard, PaperArtifactReachable) {
  EXPECT_TRUE(contains(perturb_keyboard("various", qwerty()), "variouz"));
}

TEST(Keyboard, UnmappedCharactersYieldNothing) {
  KeyboardMap kb = qwerty();
  EXPECT_TRUE(perturb_keyboard("\xc3\xa9", kb).empty());  // e-acute
  EXPECT_TRUE(perturb_keyboard("", kb).empty());
}

TEST(Keyboard, CasePreserved) {
  for (const auto& cand : perturb_keyboard("Yes", qwerty())) {
    EXPECT_TRUE(cand[0] >= 'A' && cand[0] <= 'Z') << cand;
  }
}

TEST(Delete, PaperArtifactReachable) {
  EXPECT_TRUE(contains(perturb_delete("misconceptions"), "misconception"));
}

TEST(Delete, Enumeration) {
  std::vector<std::string> c = perturb_delete("ab");
  EXPECT_EQ(c, (std::vector<std::string>{"b", "a"}));
  EXPECT_TRUE(perturb_delete("a").empty());
}

TEST(Synonym, PaperArtifactsReachable) {
  SynonymLexicon lex = lexicon();
  EXPECT_TRUE(contains(perturb_synonym("avoid", lex), "debar"));
  EXPECT_TRUE(contains(perturb_synonym("will", lex), "volition"));
}

TEST(Synonym, LookupIsCaseFoldedAndExcludesSelf) {
  SynonymLexicon lex = lexicon();
  std::vector<std::string> c = perturb_synonym("Avoid", lex);
  EXPECT_TRUE(contains(c, "debar"));
  EXPECT_FALSE(contains(c, "avoid"));
}

TEST(Synonym, UnknownWordYieldsEmpty) {
  EXPECT_TRUE(perturb_synonym("zzzzqqq", lexicon()).empty());
}

TEST(Synonym, MultiwordLemmasAreUnderscoreJoined) {
  SynonymLexicon lex = lexicon();
  EXPECT_TRUE(contains(perturb_synonym("fulfill", lex), "carry_out"));
  for (const auto& lemma : perturb_synonym("avoid", lex))
    for (char c : lemma) EXPECT_FALSE(is_ascii_space(c));
}

TEST(Synonym, ReverseLookupFindsHeadword) {
  SynonymLexicon lex = lexicon();
  auto head = lex.reverse_lookup("volition");
  ASSERT_TRUE(head.has_value());
  EXPECT_EQ(*head, "will");
  EXPECT_FALSE(lex.reverse_lookup("nonexistentlemma").has_value());
}

// Operator laws over a random word corpus.
TEST(PerturbationLaws, RandomCorpus) {
  std::mt19937_64 rng(20260810);
  KeyboardMap kb = qwerty();
  SynonymLexicon lex = lexicon();

  for (int i = 0; i < 10000; ++i) {
    std::string word = random_word(rng);
    std::size_t len = word.size();  // ASCII only here

    for (const auto& cand : perturb_split(word)) {
      ASSERT_EQ(cand.size(), len + 1);
      std::multiset<char> expected = char_multiset(word);
      expected.insert(' ');
      ASSERT_EQ(char_multiset(cand), expected) << word << " -> " << cand;
      ASSERT_NE(cand.front(), ' ');
      ASSERT_NE(cand.back(), ' ');
    }

    for (const auto& cand : perturb_swap(word)) {
      ASSERT_EQ(cand.size(), len);
      ASSERT_EQ(char_multiset(cand), char_multiset(word));
      ASSERT_EQ(cand.front(), word.front());
      ASSERT_EQ(cand.back(), word.back());
      ASSERT_NE(cand, word);
    }

    for (const auto& cand : perturb_keyboard(word, kb)) {
      ASSERT_EQ(cand.size(), len);
      int diff = 0;
      std::size_t diff_at = 0;
      for (std::size_t j = 0; j < len; ++j)
        if (cand[j] != word[j]) {
          ++diff;
          diff_at = j;
        }
      ASSERT_EQ(diff, 1);
      std::string neighbors = kb.neighbors(std::string(1, word[diff_at]));
      ASSERT_NE(neighbors.find(cand[diff_at]), std::string::npos);
    }

    for (const auto& cand : perturb_delete(word)) {
      ASSERT_EQ(cand.size(), len - 1);
    }

    for (const auto& cand : perturb_synonym(word, lex)) {
      for (char c : cand) ASSERT_FALSE(is_ascii_space(c));
      ASSERT_NE(to_lower_ascii(cand), to_lower_ascii(word));
    }
  }
}

TEST(PerturbationLaws, Utf8ScalarsNeverSplit) {
  std::string word = "caf\xc3\xa9s";  // 5 scalars, 6 bytes
  for (const auto& cand : perturb_swap(word + "x")) {
    // every candidate must remain valid UTF-8 with intact scalars
    for (const auto& sc : utf8_scalars(cand))
      ASSERT_LE(sc.size(), 2u);
  }
  std::vector<std::string> dels = perturb_delete(word);
  EXPECT_EQ(dels.size(), 5u);
  for (const auto& cand : dels)
    ASSERT_TRUE(cand.find('\xc3') == std::string::npos ||
                cand.find("\xc3\xa9") != std::string::npos);
}
