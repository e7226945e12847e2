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

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#ifdef __unix__
#include <unistd.h>
#endif

#include "promptforge/defense.hpp"
#include "promptforge/embedding.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/harness.hpp"
#include "promptforge/http_backend.hpp"
#include "promptforge/oracle.hpp"
#include "promptforge/perplexity.hpp"
#include "promptforge/perturb.hpp"
#include "promptforge/prompt.hpp"
#include "promptforge/query.hpp"
#include "promptforge/simulated.hpp"
#include "promptforge/stage1.hpp"
#include "promptforge/stage2.hpp"
#include "promptforge/stealth.hpp"

namespace promptforge {

namespace detail {

inline void require_keys(const nlohmann::json& j,
                         const std::set<std::string>& known,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, unused] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown key \"" + key + "\" in " + where);
}

inline nlohmann::json json_from_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace detail

/// Where a model lives: a chat-completions endpoint, the offline
/// rule-based simulator, or a canned response script.
struct BackendSpec {
  std::string kind;  // "http" | "simulated" | "scripted"
  std::string base_url;
  std::string model;
  std::string api_key_env = "PROMPTFORGE_API_KEY";
  std::string config_path;     // simulated
  long fail_after = -1;        // simulated: fault injection for tests
  std::string responses_path;  // scripted

  static BackendSpec from_json(const nlohmann::json& j,
                               const std::string& where,
                               const std::filesystem::path& base_dir) {
    detail::require_keys(j,
                         {"kind", "base_url", "model", "api_key_env", "config",
                          "fail_after", "responses"},
                         where);
    BackendSpec spec;
    spec.kind = j.at("kind").get<std::string>();
    if (spec.kind == "http") {
      spec.base_url = j.at("base_url").get<std::string>();
      spec.model = j.at("model").get<std::string>();
      if (j.contains("api_key_env"))
        spec.api_key_env = j.at("api_key_env").get<std::string>();
    } else if (spec.kind == "simulated") {
      spec.config_path = (base_dir / j.at("config").get<std::string>()).string();
      if (j.contains("fail_after")) spec.fail_after = j.at("fail_after").get<long>();
    } else if (spec.kind == "scripted") {
      spec.responses_path =
          (base_dir / j.at("responses").get<std::string>()).string();
    } else {
      throw ConfigError(where + ": unknown backend kind \"" + spec.kind + "\"");
    }
    return spec;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"kind", kind}};
    if (kind == "http") {
      j["base_url"] = base_url;
      j["model"] = model;
      j["api_key_env"] = api_key_env;
    } else if (kind == "simulated") {
      j["config"] = config_path;
      if (fail_after >= 0) j["fail_after"] = fail_after;
    } else {
      j["responses"] = responses_path;
    }
    return j;
  }

  std::shared_ptr<ChatBackend> build() const {
    if (kind == "http")
      return std::make_shared<HttpBackend>(base_url, model, api_key_env);
    if (kind == "simulated")
      return std::make_shared<SimulatedBackend>(
          SimulatedModelConfig::load(config_path), fail_after);
    return ScriptedBackend::load(responses_path);
  }
};

struct SanitizerSpec {
  std::string kind = "mock";  // "mock" | "llm"
  std::optional<BackendSpec> backend;
};

struct Prices {
  double prompt_per_1k = 0.00015;
  double completion_per_1k = 0.0006;
};

/// Every hyperparameter of a campaign in one strict JSON document;
/// unknown keys are rejected. Relative paths resolve against the
/// config file's directory.
struct CampaignConfig {
  BackendSpec victim;
  BackendSpec rewriter;
  std::optional<BackendSpec> judge;
  SanitizerSpec sanitizer;
  int embedding_dim = 256;
  std::string perplexity_corpus;
  std::string templates_dir;
  std::string initial_prompt_path;
  std::string synonyms_path;
  std::string keyboard_path;
  std::string sanitizer_wordlist_path;
  std::string sanitizer_typos_path;
  std::optional<SplitSpec> splits;
  AttackMode mode = AttackMode::untargeted;
  std::vector<AnswerFormat> formats{AnswerFormat::freeform};
  int t_iterations = 3;
  int m_budget = 0;
  int k_threshold = 1;
  int c_per_kind = 5;
  double delta = 0.5;
  std::optional<double> tau;
  double benign_floor = 0.8;
  std::uint64_t seed = 0;
  int concurrency = 1;
  std::string task_description =
      "Answer general knowledge questions with a short factual answer.";
  DecodeParams victim_decode;
  DecodeParams rewriter_decode{0.7, 512, std::nullopt};
  Prices prices;
  RetryPolicy retry;
  bool reject_on_stealth_violation = false;

  void validate() const {
    if (t_iterations < 0) throw ConfigError("T must be >= 0");
    if (m_budget < 0) throw ConfigError("M must be >= 0");
    if (k_threshold < 1) throw ConfigError("k must be >= 1");
    if (c_per_kind < 1) throw ConfigError("C must be >= 1");
    if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
    if (benign_floor < 0.0) throw ConfigError("benign_floor must be >= 0");
    if (formats.empty()) throw ConfigError("formats must be non-empty");
  }

  static CampaignConfig load(const std::string& path) {
    nlohmann::json j = detail::json_from_file(path);
    std::filesystem::path base_dir =
        std::filesystem::absolute(path).parent_path();
    detail::require_keys(
        j,
        {"victim", "rewriter", "judge", "sanitizer", "embedding",
         "perplexity_corpus", "templates_dir", "initial_prompt", "synonyms",
         "keyboard", "sanitizer_wordlist", "sanitizer_typos", "splits", "mode",
         "formats", "T", "M", "k", "C", "delta", "tau", "benign_floor", "seed",
         "concurrency", "task_description", "decode", "rewriter_decode",
         "prices", "retry", "reject_on_stealth_violation"},
        "config");

    CampaignConfig c;
    auto rel = [&](const std::string& p) { return (base_dir / p).string(); };

    c.victim = BackendSpec::from_json(j.at("victim"), "victim", base_dir);
    c.rewriter = BackendSpec::from_json(j.at("rewriter"), "rewriter", base_dir);
    if (j.contains("judge") && !j.at("judge").is_null())
      c.judge = BackendSpec::from_json(j.at("judge"), "judge", base_dir);
    if (j.contains("sanitizer")) {
      const auto& s = j.at("sanitizer");
      detail::require_keys(s, {"kind", "backend"}, "sanitizer");
      c.sanitizer.kind = s.at("kind").get<std::string>();
      if (c.sanitizer.kind == "llm")
        c.sanitizer.backend = BackendSpec::from_json(s.at("backend"),
                                                     "sanitizer.backend",
                                                     base_dir);
      else if (c.sanitizer.kind != "mock")
        throw ConfigError("sanitizer kind must be \"mock\" or \"llm\"");
    }
    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      detail::require_keys(e, {"kind", "dim"}, "embedding");
      if (e.at("kind").get<std::string>() != "hashed_bow")
        throw ConfigError("embedding kind must be \"hashed_bow\"");
      if (e.contains("dim")) c.embedding_dim = e.at("dim").get<int>();
    }
    c.perplexity_corpus = rel(j.at("perplexity_corpus").get<std::string>());
    c.templates_dir = rel(j.at("templates_dir").get<std::string>());
    c.initial_prompt_path = rel(j.at("initial_prompt").get<std::string>());
    c.synonyms_path = rel(j.at("synonyms").get<std::string>());
    c.keyboard_path = rel(j.at("keyboard").get<std::string>());
    if (j.contains("sanitizer_wordlist"))
      c.sanitizer_wordlist_path =
          rel(j.at("sanitizer_wordlist").get<std::string>());
    if (j.contains("sanitizer_typos"))
      c.sanitizer_typos_path = rel(j.at("sanitizer_typos").get<std::string>());
    if (j.contains("splits") && !j.at("splits").is_null()) {
      const auto& s = j.at("splits");
      detail::require_keys(s,
                           {"n_target_train", "n_target_eval", "n_benign_train",
                            "n_benign_eval", "seed"},
                           "splits");
      SplitSpec spec;
      spec.n_target_train = s.at("n_target_train").get<int>();
      spec.n_target_eval = s.at("n_target_eval").get<int>();
      spec.n_benign_train = s.at("n_benign_train").get<int>();
      spec.n_benign_eval = s.at("n_benign_eval").get<int>();
      spec.seed = s.contains("seed") ? s.at("seed").get<std::uint64_t>()
                                     : j.value("seed", 0ULL);
      c.splits = spec;
    }
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "targeted")
      c.mode = AttackMode::targeted;
    else if (mode == "untargeted")
      c.mode = AttackMode::untargeted;
    else
      throw ConfigError("mode must be \"targeted\" or \"untargeted\"");
    if (j.contains("formats")) {
      c.formats.clear();
      for (const auto& f : j.at("formats"))
        c.formats.push_back(format_from_string(f.get<std::string>()));
    }
    if (j.contains("T")) c.t_iterations = j.at("T").get<int>();
    c.m_budget = j.at("M").get<int>();
    c.k_threshold = j.at("k").get<int>();
    if (j.contains("C")) c.c_per_kind = j.at("C").get<int>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("tau") && !j.at("tau").is_null())
      c.tau = j.at("tau").get<double>();
    if (j.contains("benign_floor"))
      c.benign_floor = j.at("benign_floor").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("concurrency")) c.concurrency = j.at("concurrency").get<int>();
    if (j.contains("task_description"))
      c.task_description = j.at("task_description").get<std::string>();
    auto read_decode = [](const nlohmann::json& d, const std::string& where) {
      detail::require_keys(d, {"temperature", "max_tokens", "seed"}, where);
      DecodeParams p;
      if (d.contains("temperature")) p.temperature = d.at("temperature").get<double>();
      if (d.contains("max_tokens")) p.max_tokens = d.at("max_tokens").get<int>();
      if (d.contains("seed") && !d.at("seed").is_null())
        p.seed = d.at("seed").get<int>();
      return p;
    };
    if (j.contains("decode"))
      c.victim_decode = read_decode(j.at("decode"), "decode");
    if (j.contains("rewriter_decode")) {
      c.rewriter_decode = read_decode(j.at("rewriter_decode"), "rewriter_decode");
      if (!j.at("rewriter_decode").contains("temperature"))
        c.rewriter_decode.temperature = 0.7;
    }
    if (j.contains("prices")) {
      const auto& p = j.at("prices");
      detail::require_keys(p, {"prompt_per_1k", "completion_per_1k"}, "prices");
      c.prices.prompt_per_1k = p.at("prompt_per_1k").get<double>();
      c.prices.completion_per_1k = p.at("completion_per_1k").get<double>();
    }
    if (j.contains("retry")) {
      const auto& r = j.at("retry");
      detail::require_keys(r, {"max_attempts", "base_delay_ms", "max_delay_ms"},
                           "retry");
      if (r.contains("max_attempts"))
        c.retry.max_attempts = r.at("max_attempts").get<int>();
      if (r.contains("base_delay_ms"))
        c.retry.base_delay_ms = r.at("base_delay_ms").get<int>();
      if (r.contains("max_delay_ms"))
        c.retry.max_delay_ms = r.at("max_delay_ms").get<int>();
    }
    if (j.contains("reject_on_stealth_violation"))
      c.reject_on_stealth_violation =
          j.at("reject_on_stealth_violation").get<bool>();
    c.retry.jitter_seed = c.seed;
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["victim"] = victim.to_json();
    j["rewriter"] = rewriter.to_json();
    j["judge"] = judge ? judge->to_json() : nlohmann::json(nullptr);
    j["sanitizer"] = {{"kind", sanitizer.kind}};
    if (sanitizer.backend) j["sanitizer"]["backend"] = sanitizer.backend->to_json();
    j["embedding"] = {{"kind", "hashed_bow"}, {"dim", embedding_dim}};
    j["perplexity_corpus"] = perplexity_corpus;
    j["templates_dir"] = templates_dir;
    j["initial_prompt"] = initial_prompt_path;
    j["synonyms"] = synonyms_path;
    j["keyboard"] = keyboard_path;
    j["sanitizer_wordlist"] = sanitizer_wordlist_path;
    j["sanitizer_typos"] = sanitizer_typos_path;
    if (splits)
      j["splits"] = {{"n_target_train", splits->n_target_train},
                     {"n_target_eval", splits->n_target_eval},
                     {"n_benign_train", splits->n_benign_train},
                     {"n_benign_eval", splits->n_benign_eval},
                     {"seed", splits->seed}};
    else
      j["splits"] = nullptr;
    j["mode"] = mode == AttackMode::targeted ? "targeted" : "untargeted";
    nlohmann::json fmts = nlohmann::json::array();
    for (auto f : formats) fmts.push_back(to_string(f));
    j["formats"] = fmts;
    j["T"] = t_iterations;
    j["M"] = m_budget;
    j["k"] = k_threshold;
    j["C"] = c_per_kind;
    j["delta"] = delta;
    j["tau"] = tau ? nlohmann::json(*tau) : nlohmann::json(nullptr);
    j["benign_floor"] = benign_floor;
    j["seed"] = seed;
    j["concurrency"] = concurrency;
    j["task_description"] = task_description;
    j["decode"] = {{"temperature", victim_decode.temperature},
                   {"max_tokens", victim_decode.max_tokens},
                   {"seed", victim_decode.seed
                                ? nlohmann::json(*victim_decode.seed)
                                : nlohmann::json(nullptr)}};
    j["rewriter_decode"] = {{"temperature", rewriter_decode.temperature},
                            {"max_tokens", rewriter_decode.max_tokens},
                            {"seed", rewriter_decode.seed
                                         ? nlohmann::json(*rewriter_decode.seed)
                                         : nlohmann::json(nullptr)}};
    j["prices"] = {{"prompt_per_1k", prices.prompt_per_1k},
                   {"completion_per_1k", prices.completion_per_1k}};
    j["retry"] = {{"max_attempts", retry.max_attempts},
                  {"base_delay_ms", retry.base_delay_ms},
                  {"max_delay_ms", retry.max_delay_ms}};
    j["reject_on_stealth_violation"] = reject_on_stealth_violation;
    return j;
  }
};

/// Request/cost accounting across all oracles of one command run.
struct CampaignLedger {
  long total_requests = 0;
  long cache_hits = 0;
  long backend_calls = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  double estimated_cost = 0.0;

  void add(const OracleStats& stats) {
    total_requests += stats.total_requests.load();
    cache_hits += stats.cache_hits.load();
    backend_calls += stats.backend_calls.load();
    prompt_tokens += stats.prompt_tokens.load();
    completion_tokens += stats.completion_tokens.load();
  }

  void price(const Prices& prices) {
    estimated_cost =
        static_cast<double>(prompt_tokens) / 1000.0 * prices.prompt_per_1k +
        static_cast<double>(completion_tokens) / 1000.0 *
            prices.completion_per_1k;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"total_requests", total_requests},
                          {"cache_hits", cache_hits},
                          {"backend_calls", backend_calls},
                          {"prompt_tokens", prompt_tokens},
                          {"completion_tokens", completion_tokens},
                          {"estimated_cost", estimated_cost}};
  }
};

/// One campaign per directory, enforced by a pid lock file. A lock left
/// behind by a dead process is taken over.
class CampaignLock {
 public:
  explicit CampaignLock(const std::filesystem::path& dir)
      : path_(dir / "lock") {
    if (std::filesystem::exists(path_)) {
      long pid = 0;
      try {
        pid = std::stol(trim(read_text_file(path_.string())));
      } catch (...) {
        pid = 0;
      }
#ifdef __unix__
      if (pid > 0 && ::kill(static_cast<pid_t>(pid), 0) == 0)
        throw Error("campaign directory is locked by running pid " +
                    std::to_string(pid));
#endif
    }
#ifdef __unix__
    write_text_file(path_.string(), std::to_string(::getpid()) + "\n");
#else
    write_text_file(path_.string(), "0\n");
#endif
  }

  ~CampaignLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

  CampaignLock(const CampaignLock&) = delete;
  CampaignLock& operator=(const CampaignLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Built runtime for one campaign directory: backends, oracles, scorers
/// and templates, ready for the command implementations.
struct Campaign {
  CampaignConfig config;
  std::filesystem::path dir;
  QuerySet dataset;
  std::shared_ptr<QueryCache> cache;
  std::unique_ptr<Oracle> victim;
  std::unique_ptr<Oracle> rewriter;
  std::unique_ptr<Oracle> judge;
  std::unique_ptr<Oracle> sanitizer_oracle;
  HashedBowEmbedder embedder{256};
  TrigramScorer perplexity;
  KeyboardMap keyboard;
  SynonymLexicon synonyms;
  ItemScorer scorer;
  AapTemplates aap_templates;
  std::string choice_template;
  std::string polish_template;
  std::string paraphrase_template;
  std::string judge_template;
  PromptText initial_prompt;
  double tau_resolved = 0.0;

  static Campaign open(const CampaignConfig& config,
                       const std::filesystem::path& dir,
                       const std::string& dataset_path) {
    Campaign c;
    c.config = config;
    c.dir = dir;

    c.dataset = load_dataset(dataset_path);
    if (config.splits) {
      c.dataset = make_splits(std::move(c.dataset), *config.splits);
    } else {
      for (const auto& item : c.dataset.targets)
        if (!item.split)
          throw ConfigError("item " + item.id +
                            " has no split label and config defines no splits");
      for (const auto& item : c.dataset.benigns)
        if (!item.split)
          throw ConfigError("item " + item.id +
                            " has no split label and config defines no splits");
    }
    c.dataset.validate_for_mode(config.mode);
    int train_targets = static_cast<int>(c.dataset.train_targets().size());
    if (config.k_threshold > train_targets)
      throw ConfigError("k (" + std::to_string(config.k_threshold) +
                        ") exceeds the number of target train items (" +
                        std::to_string(train_targets) + ")");

    c.cache = QueryCache::open((dir / "cache.jsonl").string());
    c.victim = std::make_unique<Oracle>(config.victim.build(), c.cache,
                                        config.retry, config.concurrency);
    // The rewriter samples; caching would pin every re-ask to the first
    // reply, so it runs uncached.
    c.rewriter = std::make_unique<Oracle>(config.rewriter.build(), nullptr,
                                          config.retry, 1);
    if (config.judge)
      c.judge = std::make_unique<Oracle>(config.judge->build(), nullptr,
                                         config.retry, 1);
    if (config.sanitizer.kind == "llm")
      c.sanitizer_oracle = std::make_unique<Oracle>(
          config.sanitizer.backend->build(), nullptr, config.retry, 1);

    c.embedder = HashedBowEmbedder(config.embedding_dim);
    c.perplexity = TrigramScorer::train_from_file(config.perplexity_corpus);
    c.keyboard = KeyboardMap::load(config.keyboard_path);
    c.synonyms = SynonymLexicon::load(config.synonyms_path);

    auto tpl = [&](const char* name) {
      return load_template(
          (std::filesystem::path(config.templates_dir) / name).string());
    };
    c.choice_template = tpl("question_choice.txt");
    c.aap_templates.analyzer = tpl("analyzer.txt");
    c.aap_templates.generator = tpl("generator.txt");
    c.aap_templates.task_description = config.task_description;
    c.aap_templates.generator_temperature = config.rewriter_decode.temperature;
    c.aap_templates.rewriter_max_tokens = config.rewriter_decode.max_tokens;
    c.polish_template = tpl("polish.txt");
    c.paraphrase_template = tpl("paraphrase.txt");
    c.judge_template = tpl("judge.txt");

    c.scorer.embedder = &c.embedder;
    c.scorer.choice_template = c.choice_template;
    c.scorer.decode = config.victim_decode;

    c.initial_prompt =
        tokenize_prompt(read_text_file(config.initial_prompt_path));
    c.tau_resolved = config.tau
                         ? *config.tau
                         : 5.0 * c.perplexity.perplexity(c.initial_prompt.raw());
    return c;
  }

  std::unique_ptr<Sanitizer> make_sanitizer() {
    if (config.sanitizer.kind == "llm") {
      if (!sanitizer_oracle) throw ConfigError("llm sanitizer has no backend");
      return std::make_unique<LlmSanitizer>(*sanitizer_oracle, polish_template,
                                            paraphrase_template);
    }
    if (config.sanitizer_wordlist_path.empty() ||
        config.sanitizer_typos_path.empty())
      throw ConfigError(
          "mock sanitizer needs sanitizer_wordlist and sanitizer_typos");
    return std::make_unique<MockSanitizer>(
        MockSanitizer::load_wordlist(config.sanitizer_wordlist_path),
        MockSanitizer::load_typo_table(config.sanitizer_typos_path),
        &synonyms);
  }

  CampaignLedger ledger() const {
    CampaignLedger l;
    l.add(victim->stats());
    l.add(rewriter->stats());
    if (judge) l.add(judge->stats());
    if (sanitizer_oracle) l.add(sanitizer_oracle->stats());
    l.price(config.prices);
    return l;
  }

  void write_ledger() const {
    write_text_file((dir / "ledger.json").string(), ledger().to_json().dump(2));
  }

  std::string config_fingerprint() const {
    return fnv1a64_hex(config.to_json().dump());
  }

  std::vector<const QueryItem*> all_targets() const {
    return dataset.select(Role::target, std::nullopt);
  }
};

namespace detail {

inline nlohmann::json attack_state_to_json(const AttackState& state) {
  nlohmann::json edits = nlohmann::json::array();
  for (const auto& e : state.accepted_edits)
    edits.push_back({{"kind", to_string(e.kind)},
                     {"word_index", e.word_index},
                     {"original", e.original},
                     {"replacement", e.replacement}});
  return nlohmann::json{
      {"prompt", state.prompt.raw()},
      {"loss",
       {{"l_adv", state.loss.l_adv},
        {"l_benign", state.loss.l_benign},
        {"l_joint", state.loss.l_joint},
        {"score_s", state.loss.score_s}}},
      {"accepted_edits", edits},
      {"perturbations_tried", state.perturbations_tried_m},
      {"budget_m", state.budget_m},
      {"success_threshold_k", state.success_threshold_k},
      {"baseline_benign_f1", state.baseline_benign_f1},
      {"success", state.success}};
}

inline nlohmann::json history_record(const AapCandidate& c) {
  return nlohmann::json{
      {"iteration", c.iteration},
      {"prompt", c.prompt.raw()},
      {"score", c.score},
      {"predicted_score", c.predicted_score
                              ? nlohmann::json(*c.predicted_score)
                              : nlohmann::json(nullptr)},
      {"analysis", c.analysis},
      {"failure_count", c.failure_cases.size()}};
}

inline void write_history(const std::filesystem::path& path,
                          const AapHistory& history) {
  std::ostringstream out;
  for (const auto& c : history.candidates)
    out << history_record(c).dump() << "\n";
  write_text_file(path.string(), out.str());
}

}  // namespace detail

/// Runs the two-stage attack end to end. Exit status: 0 when the
/// success predicate held, 2 when budgets ran out (best-effort prompt is
/// still written), 1 on error.
inline int cmd_attack(const std::string& config_path,
                      const std::string& dataset_path,
                      const std::string& out_dir,
                      std::optional<std::uint64_t> seed_override = std::nullopt,
                      std::ostream& err = std::cerr) {
  try {
    std::filesystem::create_directories(out_dir);
    CampaignLock lock(out_dir);
    CampaignConfig config = CampaignConfig::load(config_path);
    if (seed_override) config.seed = *seed_override;
    write_text_file((std::filesystem::path(out_dir) / "config.snapshot.json")
                        .string(),
                    config.to_json().dump(2));
    Campaign campaign = Campaign::open(config, out_dir, dataset_path);

    auto history_path = campaign.dir / "history.jsonl";
    std::ofstream history_stream(history_path, std::ios::trunc);
    auto on_candidate = [&](const AapCandidate& c) {
      history_stream << detail::history_record(c).dump() << "\n";
      history_stream.flush();
    };

    AapResult stage1 = run_aap(
        campaign.initial_prompt, campaign.dataset, config.t_iterations,
        *campaign.victim, *campaign.rewriter, campaign.aap_templates,
        campaign.scorer, config.mode, on_candidate,
        static_cast<int>(config.seed & 0x7fffffff));
    history_stream.close();
    detail::write_history(history_path, stage1.history);  // with analyses

    double baseline_benign_f1 = detail::mean_f1(
        stage1.history.candidates.front().outcomes.benign);

    Stage2Config s2;
    s2.max_perturbations_m = config.m_budget;
    s2.success_threshold_k = config.k_threshold;
    s2.candidates_per_kind_c = config.c_per_kind;
    s2.benign_floor = config.benign_floor;
    s2.mode = config.mode;
    s2.seed = config.seed;

    std::function<bool(const PromptText&)> stealth_gate;
    if (config.reject_on_stealth_violation) {
      stealth_gate = [&campaign, &config](const PromptText& p) {
        StealthReport r =
            check_stealth(p, campaign.all_targets(), config.delta,
                          campaign.tau_resolved, campaign.embedder,
                          campaign.perplexity);
        return r.pass_similarity && r.pass_perplexity;
      };
    }

    auto state_path = campaign.dir / "attack_state.json";
    auto checkpoint = [&](const AttackState& s) {
      write_text_file(state_path.string(),
                      detail::attack_state_to_json(s).dump(2));
    };

    AttackState state;
    try {
      state = greedy_refine(stage1.p0_star, campaign.dataset, s2,
                            *campaign.victim, campaign.scorer,
                            campaign.keyboard, campaign.synonyms,
                            baseline_benign_f1, checkpoint, stealth_gate);
    } catch (...) {
      campaign.write_ledger();  // checkpoint + cache already on disk
      throw;
    }

    write_text_file((campaign.dir / "best_prompt.txt").string(),
                    state.prompt.raw());
    checkpoint(state);
    campaign.write_ledger();
    return state.success ? 0 : 2;
  } catch (const std::exception& e) {
    err << "attack failed: " << e.what() << "\n";
    return 1;
  }
}

/// Evaluates a prompt file on the eval splits in each requested format
/// and writes report.json / report.csv.
inline int cmd_evaluate(const std::string& config_path,
                        const std::string& prompt_path,
                        const std::string& dataset_path,
                        const std::string& out_dir,
                        std::vector<AnswerFormat> formats_override = {},
                        std::optional<std::uint64_t> seed_override = std::nullopt,
                        std::ostream& err = std::cerr) {
  try {
    std::filesystem::create_directories(out_dir);
    CampaignLock lock(out_dir);
    CampaignConfig config = CampaignConfig::load(config_path);
    if (seed_override) config.seed = *seed_override;
    Campaign campaign = Campaign::open(config, out_dir, dataset_path);
    PromptText prompt = tokenize_prompt(read_text_file(prompt_path));

    std::vector<AnswerFormat> formats =
        formats_override.empty() ? config.formats : formats_override;

    nlohmann::json report;
    report["config_fingerprint"] = campaign.config_fingerprint();
    nlohmann::json format_reports = nlohmann::json::array();
    std::ostringstream csv;
    csv << "format,f1_benign,em_benign,f1_malicious,em_malicious,delta_f1,"
           "delta_em,psi_f1,psi_em\n";
    for (AnswerFormat fmt : formats) {
      FormatReport fr =
          evaluate_prompt(prompt, campaign.dataset, fmt, *campaign.victim,
                          campaign.scorer, config.mode);
      format_reports.push_back(format_report_to_json(fr));
      const AggregateMetrics& a = fr.aggregates;
      csv << to_string(fmt) << "," << format_fixed(a.f1_benign, 2) << ","
          << format_fixed(a.em_benign, 2) << ","
          << format_fixed(a.f1_malicious, 2) << ","
          << format_fixed(a.em_malicious, 2) << ","
          << format_fixed(a.delta_f1, 2) << "," << format_fixed(a.delta_em, 2)
          << "," << format_fixed(a.psi_f1, 2) << ","
          << format_fixed(a.psi_em, 2) << "\n";
    }
    report["formats"] = format_reports;
    report["stealth"] = stealth_to_json(
        check_stealth(prompt, campaign.all_targets(), config.delta,
                      campaign.tau_resolved, campaign.embedder,
                      campaign.perplexity));
    CampaignLedger ledger = campaign.ledger();
    report["totals"] = ledger.to_json();

    write_text_file((campaign.dir / "report.json").string(), report.dump(2));
    write_text_file((campaign.dir / "report.csv").string(), csv.str());
    campaign.write_ledger();
    return 0;
  } catch (const std::exception& e) {
    err << "evaluate failed: " << e.what() << "\n";
    return 1;
  }
}

/// Runs the detection filters plus both sanitization strengths (with
/// persistence measurement) against a prompt file.
inline int cmd_defend(const std::string& config_path,
                      const std::string& prompt_path,
                      const std::string& dataset_path,
                      const std::string& out_dir,
                      std::ostream& err = std::cerr) {
  try {
    std::filesystem::create_directories(out_dir);
    CampaignLock lock(out_dir);
    CampaignConfig config = CampaignConfig::load(config_path);
    Campaign campaign = Campaign::open(config, out_dir, dataset_path);
    PromptText prompt = tokenize_prompt(read_text_file(prompt_path));

    nlohmann::json entry;
    entry["prompt_id"] = std::filesystem::path(prompt_path).stem().string();

    nlohmann::json verdicts = nlohmann::json::array();
    auto verdict_json = [](const DetectionVerdict& v) {
      return nlohmann::json{{"filter_name", v.filter_name},
                            {"flagged", v.flagged},
                            {"score", v.score},
                            {"threshold", v.threshold}};
    };
    verdicts.push_back(verdict_json(detect_perplexity(
        prompt, campaign.tau_resolved, campaign.perplexity)));
    verdicts.push_back(verdict_json(detect_similarity(
        prompt, campaign.all_targets(), config.delta, campaign.embedder)));
    if (campaign.judge) {
      std::string warning;
      DetectionVerdict v = detect_judge(prompt, *campaign.judge,
                                        campaign.judge_template, &warning);
      nlohmann::json vj = verdict_json(v);
      if (!warning.empty()) vj["warning"] = warning;
      verdicts.push_back(vj);
    }
    entry["verdicts"] = verdicts;

    std::unique_ptr<Sanitizer> sanitizer = campaign.make_sanitizer();
    nlohmann::json sanitizations = nlohmann::json::array();
    for (SanitizeMode mode : {SanitizeMode::polish, SanitizeMode::paraphrase}) {
      nlohmann::json s;
      s["mode"] = to_string(mode);
      nlohmann::json persistence = nlohmann::json::array();
      int edit_distance = 0;
      std::string sanitized_text;
      for (AnswerFormat fmt : config.formats) {
        PersistenceReport pr = measure_persistence(
            prompt, mode, *sanitizer, campaign.dataset, fmt, *campaign.victim,
            campaign.scorer, config.mode);
        edit_distance = pr.sanitization.edit_distance_words;
        sanitized_text = pr.sanitization.sanitized.raw();
        persistence.push_back(
            {{"format", to_string(fmt)},
             {"before", aggregates_to_json(pr.before.aggregates)},
             {"after", aggregates_to_json(pr.after.aggregates)},
             {"malicious_f1_change", pr.after.aggregates.f1_malicious -
                                         pr.before.aggregates.f1_malicious}});
      }
      s["edit_distance"] = edit_distance;
      s["sanitized_prompt"] = sanitized_text;
      s["persistence"] = persistence;
      sanitizations.push_back(s);
    }
    entry["sanitization"] = sanitizations;

    nlohmann::json report = nlohmann::json::array({entry});
    write_text_file((campaign.dir / "defense_report.json").string(),
                    report.dump(2));
    campaign.write_ledger();
    return 0;
  } catch (const std::exception& e) {
    err << "defend failed: " << e.what() << "\n";
    return 1;
  }
}

/// Renders the stored reports as tables after re-deriving every
/// aggregate from the per-item records and re-checking the ledger.
/// Any inconsistency fails the command, naming the first bad field.
inline int cmd_report(const std::string& campaign_dir,
                      std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  try {
    std::filesystem::path dir(campaign_dir);
    bool printed_anything = false;

    auto report_path = dir / "report.json";
    if (std::filesystem::exists(report_path)) {
      nlohmann::json report = detail::json_from_file(report_path.string());
      out << "format        benign_f1 benign_em malicious_f1 malicious_em "
             "delta_f1 delta_em psi_f1 psi_em\n";
      for (const auto& fr_json : report.at("formats")) {
        FormatReport fr = format_report_from_json(fr_json);
        AggregateMetrics recomputed =
            aggregate(fr.per_item_benign, fr.per_item_malicious);
        const AggregateMetrics& stored = fr.aggregates;
        auto check = [&](double a, double b, const char* field) {
          if (a != b)
            throw Error(std::string("report inconsistency in field \"") +
                        field + "\" for format " + to_string(fr.format) +
                        ": stored " + format_fixed(b, 6) + ", recomputed " +
                        format_fixed(a, 6));
        };
        check(recomputed.f1_benign, stored.f1_benign, "f1_benign");
        check(recomputed.em_benign, stored.em_benign, "em_benign");
        check(recomputed.f1_malicious, stored.f1_malicious, "f1_malicious");
        check(recomputed.em_malicious, stored.em_malicious, "em_malicious");
        check(recomputed.delta_f1, stored.delta_f1, "delta_f1");
        check(recomputed.delta_em, stored.delta_em, "delta_em");
        check(recomputed.psi_f1, stored.psi_f1, "psi_f1");
        check(recomputed.psi_em, stored.psi_em, "psi_em");
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%-13s %9.2f %9.2f %12.2f %12.2f %8.2f %8.2f %6.2f %6.2f\n",
                      to_string(fr.format).c_str(), stored.f1_benign,
                      stored.em_benign, stored.f1_malicious,
                      stored.em_malicious, stored.delta_f1, stored.delta_em,
                      stored.psi_f1, stored.psi_em);
        out << line;
      }
      if (report.contains("stealth")) {
        StealthReport s = stealth_from_json(report.at("stealth"));
        out << "stealth: max_cos=" << format_fixed(s.max_cosine_to_targets, 4)
            << " mean_cos=" << format_fixed(s.mean_cosine_to_targets, 4)
            << " ppl=" << format_fixed(s.perplexity, 2)
            << " similarity=" << (s.pass_similarity ? "pass" : "FAIL")
            << " perplexity=" << (s.pass_perplexity ? "pass" : "FAIL") << "\n";
      }
      printed_anything = true;
    }

    auto state_path = dir / "attack_state.json";
    if (std::filesystem::exists(state_path)) {
      nlohmann::json st = detail::json_from_file(state_path.string());
      out << "attack: success=" << (st.at("success").get<bool>() ? "yes" : "no")
          << " accepted_edits=" << st.at("accepted_edits").size()
          << " l_joint=" << format_fixed(st.at("loss").at("l_joint").get<double>(), 4)
          << "\n";
      printed_anything = true;
    }

    auto ledger_path = dir / "ledger.json";
    if (std::filesystem::exists(ledger_path)) {
      nlohmann::json lj = detail::json_from_file(ledger_path.string());
      long total = lj.at("total_requests").get<long>();
      long hits = lj.at("cache_hits").get<long>();
      long calls = lj.at("backend_calls").get<long>();
      if (total != hits + calls)
        throw Error("ledger inconsistency in field \"total_requests\": " +
                    std::to_string(total) + " != " + std::to_string(hits) +
                    " + " + std::to_string(calls));
      auto snapshot_path = dir / "config.snapshot.json";
      if (std::filesystem::exists(snapshot_path)) {
        nlohmann::json cfg = detail::json_from_file(snapshot_path.string());
        if (cfg.contains("prices")) {
          double expect =
              lj.at("prompt_tokens").get<double>() / 1000.0 *
                  cfg.at("prices").at("prompt_per_1k").get<double>() +
              lj.at("completion_tokens").get<double>() / 1000.0 *
                  cfg.at("prices").at("completion_per_1k").get<double>();
          double stored = lj.at("estimated_cost").get<double>();
          if (std::abs(expect - stored) > 1e-9)
            throw Error("ledger inconsistency in field \"estimated_cost\"");
        }
      }
      out << "ledger: requests=" << total << " cache_hits=" << hits
          << " backend_calls=" << calls << " cost=$"
          << format_fixed(lj.at("estimated_cost").get<double>(), 4) << "\n";
      printed_anything = true;
    }

    auto defense_path = dir / "defense_report.json";
    if (std::filesystem::exists(defense_path)) {
      nlohmann::json dj = detail::json_from_file(defense_path.string());
      for (const auto& entry : dj) {
        out << "defense " << entry.at("prompt_id").get<std::string>() << ":";
        for (const auto& v : entry.at("verdicts"))
          out << " " << v.at("filter_name").get<std::string>() << "="
              << (v.at("flagged").get<bool>() ? "flagged" : "clear");
        out << "\n";
      }
      printed_anything = true;
    }

    if (!printed_anything) throw Error("no reports found in " + campaign_dir);
    return 0;
  } catch (const std::exception& e) {
    err << "report failed: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace promptforge
