// Copyright 2026 The NLLF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end for the staged pipeline.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nllf/pipeline.hpp"
#include "nllf/synthetic.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  bool dry_run = false;
  bool force = false;
  bool quiet = false;
  std::vector<std::string> sets;
  std::optional<double> p_q;
  std::optional<double> p_l;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Task config (JSON)")->required();
  cmd->add_option("-o,--out", c.out, "Run directory")->required();
  cmd->add_flag("--dry-run", c.dry_run, "Print the plan and estimated LLM calls; write nothing");
  cmd->add_flag("--force", c.force, "Rerun even when up to date");
  cmd->add_flag("-q,--quiet", c.quiet, "Only print errors");
  cmd->add_option("--set", c.sets, "Override a config value: section.key=value");
  cmd->add_option("--p-q", c.p_q, "Share of the training pool used for question generation");
  cmd->add_option("--p-l", c.p_l, "Share of the training pool that is weak-labeled");
}

int run_stages(const Common& c, const std::vector<std::string>& stages) {
  auto config = nllf::pipeline::RunConfig::load(c.config);
  for (const auto& s : c.sets) config.set(s);
  if (c.p_q) config.set("task.p_q=" + nllf::io::format_double(*c.p_q));
  if (c.p_l) config.set("task.p_l=" + nllf::io::format_double(*c.p_l));
  nllf::pipeline::Options opt;
  opt.dry_run = c.dry_run;
  opt.force = c.force;
  opt.log = c.quiet ? nullptr : &std::cout;
  nllf::pipeline::Runner runner(config, c.out, opt);
  const auto outcomes = runner.run_all(stages);
  if (c.dry_run) {
    std::size_t total = 0;
    for (const auto& o : outcomes) total += o.estimated_llm_calls;
    if (!c.quiet) std::cout << "estimated LLM calls (upper bound, before cache hits): " << total << "\n";
  } else if (!c.quiet) {
    const auto st = runner.llm_stats();
    std::cout << "LLM backend calls: " << st.backend_calls << ", cache hits: " << st.cache_hits << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised text classification with natural-language learned features"};
  app.require_subcommand(1);

  Common common;
  std::string model_kind;
  std::string strategy;
  std::vector<std::string> run_list;
  std::vector<std::string> stages;

  const std::vector<std::pair<std::string, std::string>> simple{
      {"ingest", "Validate a corpus and copy it into the run directory"},
      {"split", "Partition the corpus into train/val/test"},
      {"gen-bsq", "Generate raw binary questions with the LLM"},
      {"curate-import", "Import the curated question set"},
      {"augment-bsq", "Add linguistic, human and paraphrased questions"},
      {"weak-label", "Weak-label a sample of the training pool"},
      {"train-nllfg", "Train the question-answering feature generator"},
      {"build-features", "Build NLLF, expert and n-gram feature matrices"},
      {"select-features", "Genetic feature selection under cross-validation"},
      {"evaluate", "Score model predictions on the test split"},
      {"explain", "Render decision-path explanations for test examples"},
      {"audit", "Compare generator and LLM verdicts against expert labels"}};
  for (const auto& [name, help] : simple) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    cmd->callback([&stages, name = name] { stages = {name}; });
  }

  auto* train = app.add_subcommand("train", "Train a decision tree or an encoder classifier");
  add_common(train, common);
  train->add_option("model", model_kind, "tree | encoder")->required()->check(CLI::IsMember({"tree", "encoder"}));
  train->callback([&] { stages = {"train-" + model_kind}; });

  auto* baseline = app.add_subcommand("baseline", "Run an LLM prompting baseline on the test split");
  add_common(baseline, common);
  baseline->add_option("strategy", strategy, "vanilla | cot | self-ask")
      ->required()
      ->check(CLI::IsMember({"vanilla", "cot", "self-ask"}));
  baseline->callback([&] { stages = {"baseline-" + strategy}; });

  auto* run = app.add_subcommand("run", "Run several stages in order, skipping up-to-date ones");
  add_common(run, common);
  run->add_option("--stages", run_list, "Stage list (default: config run.stages or the standard chain)")
      ->delimiter(',');
  run->callback([&] { stages = {"@run"}; });

  std::string synth_dir;
  nllf::io::Json synth_json = nllf::io::Json::object();
  std::size_t synth_examples = 2000;
  std::uint64_t synth_seed = 0;
  double synth_noise = 0.10;
  auto* synth = app.add_subcommand("generate-synthetic", "Write a planted-rule corpus, mock LLM config and templates");
  synth->add_option("-d,--dir", synth_dir, "Workspace directory")->required();
  synth->add_option("--examples", synth_examples, "Corpus size")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--noise", synth_noise, "Share of mock answers that are flipped")->capture_default_str();

  app.add_subcommand("stages", "List the stage names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("stages")) {
      for (const auto& s : nllf::pipeline::stage_names()) std::cout << s << "\n";
      return 0;
    }
    if (app.got_subcommand("generate-synthetic")) {
      nllf::synthetic::Spec spec;
      spec.examples = synth_examples;
      spec.seed = synth_seed;
      spec.answer_noise = synth_noise;
      nllf::synthetic::write_workspace(synth_dir, spec);
      std::cout << "wrote " << synth_dir << "/config.json\n";
      return 0;
    }
    if (stages.size() == 1 && stages[0] == "@run") {
      if (run_list.empty()) {
        auto config = nllf::pipeline::RunConfig::load(common.config);
        const auto r = config.section("run");
        run_list = r.contains("stages") ? r["stages"].get<std::vector<std::string>>()
                                        : nllf::pipeline::default_run_stages();
      }
      stages = run_list;
    }
    return run_stages(common, stages);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nllf::pipeline::exit_code_for(e);
  }
}
