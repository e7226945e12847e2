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

#include "promptforge/stage2.hpp"

#include "gtest/gtest.h"
#include "promptforge/simulated.hpp"
#include "test_util.hpp"

using namespace promptforge;
using pftest::FunctionBackend;

namespace {

SimulatedModelConfig demo_config() {
  return SimulatedModelConfig::load(
      pftest::data_path("demo/simulated_model.json"));
}

QuerySet demo_dataset() {
  return load_dataset(pftest::data_path("demo/dataset.jsonl"));
}

KeyboardMap qwerty() {
  return KeyboardMap::load(pftest::data_path("keyboard_qwerty.json"));
}

SynonymLexicon lexicon() {
  return SynonymLexicon::load(pftest::data_path("synonyms.tsv"));
}

ItemScorer plain_scorer() {
  ItemScorer s;
  s.decode.max_tokens = 64;
  return s;
}

Stage2Config untargeted_config(int m, int k) {
  Stage2Config c;
  c.max_perturbations_m = m;
  c.success_threshold_k = k;
  c.candidates_per_kind_c = 5;
  c.benign_floor = 0.8;
  c.mode = AttackMode::untargeted;
  c.seed = 7;
  return c;
}

}  // namespace

TEST(ImportanceRank, NeutralWordScoresExactlyZero) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()));
  QuerySet qs = demo_dataset();
  // "xyzzy" changes no simulated response.
  PromptText p = tokenize_prompt("answer the question xyzzy");
  ImportanceTable table = importance_rank(p, qs, victim, plain_scorer(),
                                          AttackMode::untargeted);
  bool found = false;
  for (const auto& e : table.entries)
    if (e.word == "xyzzy") {
      EXPECT_DOUBLE_EQ(e.importance, 0.0);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(ImportanceRank, TriggerWordHasPositiveImportance) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()));
  QuerySet qs = demo_dataset();
  PromptText p = tokenize_prompt("answer the question volition");
  ImportanceTable table = importance_rank(p, qs, victim, plain_scorer(),
                                          AttackMode::untargeted);
  // Removing the trigger raises the loss, so keeping it is valuable:
  // the trigger must rank first with importance L(p)-L(p\w) = 0-1 = -1?
  // No: importance = L(p) - L(without). L(p)=0, L(without)=1 -> -1.
  // The trigger is *protective of the attack*: dropping it hurts.
  EXPECT_EQ(table.entries.back().word, "volition");
  EXPECT_DOUBLE_EQ(table.entries.back().importance, -1.0);
}

TEST(ImportanceRank, AnchorRemovalIsProtectiveUnderTargetedLoss) {
  SimulatedModelConfig cfg = demo_config();
  Oracle victim(std::make_shared<SimulatedBackend>(cfg));
  QuerySet qs = demo_dataset();
  for (auto& t : qs.targets) t.gold_answers = {cfg.adversarial_book.at(t.id)};
  PromptText p = tokenize_prompt("answer the question");
  ImportanceTable table =
      importance_rank(p, qs, victim, plain_scorer(), AttackMode::targeted);
  for (const auto& e : table.entries) {
    if (e.word == "answer") EXPECT_LT(e.importance, 0.0);  // corruption
    if (e.word == "the") EXPECT_DOUBLE_EQ(e.importance, 0.0);
  }
}

TEST(ImportanceRank, MatchesExhaustiveLeaveOneOut) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()),
                std::make_shared<QueryCache>());
  QuerySet qs = demo_dataset();
  ItemScorer scorer = plain_scorer();
  PromptText p = tokenize_prompt("please answer the question volition now");
  ASSERT_LE(p.word_count(), 8u);

  ImportanceTable table =
      importance_rank(p, qs, victim, scorer, AttackMode::untargeted);

  // Independent recomputation: enumerate every deletion directly.
  auto benigns = qs.train_benigns();
  auto targets = qs.train_targets();
  double base = evaluate_outcomes(p, benigns, targets, victim, scorer,
                                  AttackMode::untargeted)
                    .loss.l_joint;
  std::map<int, double> expected;
  for (std::size_t j = 0; j < p.word_count(); ++j) {
    double without = evaluate_outcomes(p.remove_word(j), benigns, targets,
                                       victim, scorer, AttackMode::untargeted)
                         .loss.l_joint;
    expected[static_cast<int>(j)] = base - without;
  }
  ASSERT_EQ(table.entries.size(), p.word_count());
  for (const auto& e : table.entries)
    EXPECT_DOUBLE_EQ(e.importance, expected.at(e.word_index)) << e.word;
  for (std::size_t i = 1; i < table.entries.size(); ++i) {
    EXPECT_GE(table.entries[i - 1].importance, table.entries[i].importance);
    if (table.entries[i - 1].importance == table.entries[i].importance)
      EXPECT_LT(table.entries[i - 1].word_index, table.entries[i].word_index);
  }
}

TEST(GetBestPerturbation, NoLegalPerturbationsYieldsNone) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()));
  QuerySet qs = demo_dataset();
  PromptText p = tokenize_prompt("answer the question x");
  std::mt19937_64 rng(1);
  BestPerturbation best =
      get_best_perturbation(p, 3, qs, victim, plain_scorer(),
                            untargeted_config(8, 4), qwerty(), lexicon(), rng);
  EXPECT_FALSE(best.candidate.has_value());
}

TEST(GetBestPerturbation, TriggerCandidateWinsWithZeroAdvLoss) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()));
  QuerySet qs = demo_dataset();
  PromptText p = tokenize_prompt("you will answer the question");
  std::mt19937_64 rng(1);
  BestPerturbation best =
      get_best_perturbation(p, 1, qs, victim, plain_scorer(),
                            untargeted_config(8, 4), qwerty(), lexicon(), rng);
  ASSERT_TRUE(best.candidate.has_value());
  EXPECT_EQ(best.candidate->kind, PerturbKind::synonym);
  EXPECT_EQ(best.candidate->replacement, "volition");
  EXPECT_DOUBLE_EQ(best.loss.l_adv, 0.0);
}

TEST(GetBestPerturbation, TiesResolveByKindOrder) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()));
  QuerySet qs = demo_dataset();
  // split "s ledge" and delete "ledge" both introduce the trigger token;
  // the split kind is enumerated first and must win the tie.
  PromptText p = tokenize_prompt("answer the question sledge");
  std::mt19937_64 rng(1);
  BestPerturbation best =
      get_best_perturbation(p, 3, qs, victim, plain_scorer(),
                            untargeted_config(8, 4), qwerty(), lexicon(), rng);
  ASSERT_TRUE(best.candidate.has_value());
  EXPECT_EQ(best.candidate->kind, PerturbKind::split);
  EXPECT_EQ(best.candidate->replacement, "s ledge");
}

TEST(SuccessCheck, ThresholdAndBenignFloor) {
  EvalOutcomes outcomes;
  outcomes.benign.resize(4);
  outcomes.target.resize(4);
  for (auto& o : outcomes.benign) o.f1 = 1.0;
  for (auto& o : outcomes.target) o.indicator = 0;  // untargeted hits

  EXPECT_TRUE(success_check(outcomes, 4, AttackMode::untargeted, 0.8, 1.0));
  EXPECT_TRUE(success_check(outcomes, 1, AttackMode::untargeted, 0.8, 1.0));

  outcomes.target[0].indicator = 1;  // one target still correct
  EXPECT_FALSE(success_check(outcomes, 4, AttackMode::untargeted, 0.8, 1.0));
  EXPECT_TRUE(success_check(outcomes, 3, AttackMode::untargeted, 0.8, 1.0));

  // benign collapse fails the floor clause even with k hits
  for (auto& o : outcomes.benign) o.f1 = 0.0;
  EXPECT_FALSE(success_check(outcomes, 3, AttackMode::untargeted, 0.8, 1.0));

  // targeted counts indicator==1 as a hit
  EvalOutcomes targeted;
  targeted.benign.resize(2);
  targeted.target.resize(2);
  for (auto& o : targeted.benign) o.f1 = 1.0;
  for (auto& o : targeted.target) o.indicator = 1;
  EXPECT_TRUE(success_check(targeted, 2, AttackMode::targeted, 0.8, 1.0));
  targeted.target[1].indicator = 0;
  EXPECT_FALSE(success_check(targeted, 2, AttackMode::targeted, 0.8, 1.0));
}

TEST(GreedyRefine, MZeroIsIdentity) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()));
  QuerySet qs = demo_dataset();
  PromptText seed = tokenize_prompt(
      load_template(pftest::data_path("templates/initial_prompt.txt")));
  AttackState state =
      greedy_refine(seed, qs, untargeted_config(0, 4), victim, plain_scorer(),
                    qwerty(), lexicon(), 1.0);
  EXPECT_EQ(state.prompt.raw(), seed.raw());
  EXPECT_TRUE(state.accepted_edits.empty());
  EXPECT_FALSE(state.success);
  EXPECT_EQ(state.perturbations_tried_m, 0);
}

TEST(GreedyRefine, DemoSwapPlusSynonymScenarioSucceeds) {
  auto backend = std::make_shared<SimulatedBackend>(demo_config());
  Oracle victim(backend, std::make_shared<QueryCache>(), RetryPolicy{}, 2);
  QuerySet qs = demo_dataset();
  PromptText seed = tokenize_prompt(
      load_template(pftest::data_path("templates/initial_prompt.txt")));

  int checkpoints = 0;
  AttackState state = greedy_refine(
      seed, qs, untargeted_config(8, 4), victim, plain_scorer(), qwerty(),
      lexicon(), 1.0, [&](const AttackState&) { ++checkpoints; });

  EXPECT_TRUE(state.success);
  ASSERT_EQ(state.accepted_edits.size(), 1u);
  EXPECT_EQ(state.accepted_edits[0].kind, PerturbKind::synonym);
  EXPECT_EQ(state.accepted_edits[0].original, "will");
  EXPECT_EQ(state.accepted_edits[0].replacement, "volition");
  EXPECT_EQ(checkpoints, 1);
  // malicious train items all flipped away from the truth
  for (const auto& o : state.outcomes.target) EXPECT_EQ(o.indicator, 0);
  // benign train utility preserved
  EXPECT_DOUBLE_EQ(state.outcomes.benign_f1_mean(), 1.0);
  EXPECT_NE(state.prompt.raw().find("volition"), std::string::npos);
}

TEST(GreedyRefine, BudgetBoundsRounds) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()),
                std::make_shared<QueryCache>());
  QuerySet qs = demo_dataset();
  PromptText seed = tokenize_prompt(
      load_template(pftest::data_path("templates/initial_prompt.txt")));
  AttackState state =
      greedy_refine(seed, qs, untargeted_config(2, 4), victim, plain_scorer(),
                    qwerty(), lexicon(), 1.0);
  EXPECT_FALSE(state.success);  // the useful word sits at round 5
  EXPECT_EQ(state.perturbations_tried_m, 2);
  EXPECT_LE(state.perturbations_tried_m, state.budget_m + 1);
}

TEST(GreedyRefine, BitReproducibleAcrossRuns) {
  QuerySet qs = demo_dataset();
  PromptText seed = tokenize_prompt(
      load_template(pftest::data_path("templates/initial_prompt.txt")));
  auto run = [&] {
    Oracle victim(std::make_shared<SimulatedBackend>(demo_config()),
                  std::make_shared<QueryCache>(), RetryPolicy{}, 3);
    return greedy_refine(seed, qs, untargeted_config(8, 4), victim,
                         plain_scorer(), qwerty(), lexicon(), 1.0);
  };
  AttackState a = run();
  AttackState b = run();
  EXPECT_EQ(a.prompt.raw(), b.prompt.raw());
  ASSERT_EQ(a.accepted_edits.size(), b.accepted_edits.size());
  for (std::size_t i = 0; i < a.accepted_edits.size(); ++i) {
    EXPECT_EQ(a.accepted_edits[i].kind, b.accepted_edits[i].kind);
    EXPECT_EQ(a.accepted_edits[i].word_index, b.accepted_edits[i].word_index);
    EXPECT_EQ(a.accepted_edits[i].replacement, b.accepted_edits[i].replacement);
  }
  EXPECT_DOUBLE_EQ(a.loss.l_joint, b.loss.l_joint);
}

TEST(GreedyRefine, AcceptedLossSequenceStrictlyDecreasing) {
  // Victim with two independent trigger families so two separate edits
  // are accepted: "alpha" flips t0/t1, "beta" flips t2/t3.
  auto victim_backend =
      std::make_shared<FunctionBackend>([](const ChatRequest& r) {
        std::vector<std::string> toks = normalize_answer(r.system_prompt);
        std::set<std::string> w(toks.begin(), toks.end());
        std::string q = r.user_message;
        auto flip = [&](const char* trigger, char lo, char hi) {
          return w.count(trigger) && !q.empty() && q.back() >= lo &&
                 q.back() <= hi;
        };
        if (q.rfind("T", 0) == 0) {
          if (flip("alpha", '0', '1') || flip("beta", '2', '3'))
            return std::string("zzz");
          return "truth " + std::string(1, q.back());
        }
        return std::string("benign fact");
      });
  Oracle victim(victim_backend, std::make_shared<QueryCache>());

  QuerySet qs;
  for (int i = 0; i < 4; ++i) {
    QueryItem t;
    t.id = "t" + std::to_string(i);
    t.question = "T" + std::to_string(i);
    t.gold_answers = {"truth " + std::to_string(i)};
    t.role = Role::target;
    t.split = Split::train;
    qs.targets.push_back(t);
  }
  for (int i = 0; i < 2; ++i) {
    QueryItem b;
    b.id = "b" + std::to_string(i);
    b.question = "B" + std::to_string(i);
    b.gold_answers = {"benign fact"};
    b.role = Role::benign;
    b.split = Split::train;
    qs.benigns.push_back(b);
  }

  PromptText seed = tokenize_prompt("respond nicely alphas betas");
  std::vector<double> accepted_losses;
  AttackState state = greedy_refine(
      seed, qs, untargeted_config(10, 4), victim, plain_scorer(), qwerty(),
      lexicon(), 1.0,
      [&](const AttackState& s) { accepted_losses.push_back(s.loss.l_joint); });

  EXPECT_TRUE(state.success);
  ASSERT_EQ(accepted_losses.size(), 2u);
  EXPECT_LT(accepted_losses[1], accepted_losses[0]);
  EXPECT_DOUBLE_EQ(accepted_losses[1], 0.0);
  EXPECT_EQ(state.accepted_edits.size(), 2u);
  // the second edit was applied at a shifted index if the first was a split
  EXPECT_EQ(state.outcomes.target[0].indicator, 0);
  EXPECT_EQ(state.outcomes.target[3].indicator, 0);
}

TEST(GreedyRefine, StealthGateVetoesImprovingEdit) {
  Oracle victim(std::make_shared<SimulatedBackend>(demo_config()),
                std::make_shared<QueryCache>());
  QuerySet qs = demo_dataset();
  PromptText seed = tokenize_prompt(
      load_template(pftest::data_path("templates/initial_prompt.txt")));
  AttackState state = greedy_refine(
      seed, qs, untargeted_config(8, 4), victim, plain_scorer(), qwerty(),
      lexicon(), 1.0, nullptr,
      [](const PromptText& p) {
        return p.raw().find("volition") == std::string::npos;
      });
  EXPECT_FALSE(state.success);
  EXPECT_TRUE(state.accepted_edits.empty());
}
