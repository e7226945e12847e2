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

#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "promptforge/campaign.hpp"

int main(int argc, char** argv) {
  CLI::App app{"promptforge: conditional system prompt poisoning toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string dataset_path;
  std::string out_dir;
  std::string prompt_path;
  std::string formats_arg;
  std::string campaign_dir;
  std::optional<std::uint64_t> seed_override;
  std::uint64_t seed_value = 0;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& v) { seed_override = v; },
        "Override the seed from the config file");
  };

  CLI::App* attack = app.add_subcommand(
      "attack", "Optimize a poisoned prompt against the victim model");
  attack->add_option("--config", config_path, "Campaign config JSON")
      ->required();
  attack->add_option("--data", dataset_path, "Dataset JSONL")->required();
  attack->add_option("--out", out_dir, "Campaign directory")->required();
  add_seed(attack);

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Score a prompt on the held-out eval splits");
  evaluate->add_option("--config", config_path, "Campaign config JSON")
      ->required();
  evaluate->add_option("--prompt", prompt_path, "Prompt text file")
      ->required();
  evaluate->add_option("--data", dataset_path, "Dataset JSONL")->required();
  evaluate->add_option("--out", out_dir, "Campaign directory")->required();
  evaluate->add_option("--formats", formats_arg,
                       "Comma-separated answer formats (overrides config)");
  add_seed(evaluate);

  CLI::App* defend = app.add_subcommand(
      "defend", "Run detection filters and sanitization against a prompt");
  defend->add_option("--config", config_path, "Campaign config JSON")
      ->required();
  defend->add_option("--prompt", prompt_path, "Prompt text file")->required();
  defend->add_option("--data", dataset_path, "Dataset JSONL")->required();
  defend->add_option("--out", out_dir, "Campaign directory")->required();

  CLI::App* report = app.add_subcommand(
      "report", "Verify and render the reports in a campaign directory");
  report->add_option("campaign_dir", campaign_dir, "Campaign directory")
      ->required();

  CLI11_PARSE(app, argc, argv);
  (void)seed_value;

  if (app.got_subcommand(attack))
    return promptforge::cmd_attack(config_path, dataset_path, out_dir,
                                   seed_override);
  if (app.got_subcommand(evaluate)) {
    std::vector<promptforge::AnswerFormat> formats;
    if (!formats_arg.empty()) {
      std::size_t pos = 0;
      while (pos <= formats_arg.size()) {
        std::size_t comma = formats_arg.find(',', pos);
        std::string piece = formats_arg.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!piece.empty())
          formats.push_back(promptforge::format_from_string(piece));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
    return promptforge::cmd_evaluate(config_path, prompt_path, dataset_path,
                                     out_dir, formats, seed_override);
  }
  if (app.got_subcommand(defend))
    return promptforge::cmd_defend(config_path, prompt_path, dataset_path,
                                   out_dir);
  return promptforge::cmd_report(campaign_dir);
}
