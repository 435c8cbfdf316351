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


#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "nllf/pipeline.hpp"
#include "nllf/synthetic.hpp"
#include "test_util.hpp"

using namespace nllf;
using namespace nllf::pipeline;
namespace fs = std::filesystem;

namespace {

// Small synthetic workspace with a fast configuration.
RunConfig small_config(const std::string& dir) {
  synthetic::Spec spec;
  spec.examples = 300;
  synthetic::write_workspace(dir, spec);
  auto cfg = RunConfig::load(dir + "/config.json");
  cfg.set("nllfg.backbone_id=tiny");
  cfg.set("nllfg.epochs=1");
  cfg.set("selection.folds=3");
  cfg.set(R"(selection.ga={"population": 8, "generations": 3})");
  return cfg;
}

std::size_t files_under(const fs::path& p) {
  if (!fs::exists(p)) return 0;
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(p)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST_CASE("config assignments parse JSON and fall back to strings") {
  RunConfig cfg(io::Json::object(), "/base");
  cfg.set("a.b=3");
  cfg.set("a.c=hello");
  cfg.set("a.d=[1,2]");
  CHECK(cfg.section("a")["b"] == 3);
  CHECK(cfg.section("a")["c"] == "hello");
  CHECK(cfg.section("a")["d"].size() == 2);
  CHECK(cfg.resolve("x/y.json") == "/base/x/y.json");
  CHECK(cfg.resolve("/abs/z") == "/abs/z");
  CHECK_THROWS_AS(cfg.set("novalue"), ConfigError);
  cfg.set("task.preset=nope");
  CHECK_THROWS_AS(cfg.task(), ConfigError);
}

TEST_CASE("the stage list covers every step") {
  const auto& names = stage_names();
  for (const char* s : {"gen-bsq", "weak-label", "train-nllfg", "build-features", "select-features", "train-tree",
                        "train-encoder", "baseline-self-ask", "evaluate", "explain", "audit"}) {
    CHECK(std::find(names.begin(), names.end(), s) != names.end());
  }
}

TEST_CASE("dry run writes nothing and calls no backend") {
  const auto dir = testing::scratch_dir("pipeline_dry");
  auto cfg = small_config(dir);
  const auto llm_before = files_under(fs::path(dir) / "llm_cache");
  std::ostringstream log;
  Options opt;
  opt.dry_run = true;
  opt.log = &log;
  Runner runner(cfg, dir + "/run", opt);
  const auto out = runner.run_all(default_run_stages());
  CHECK(files_under(fs::path(dir) / "run") == 0);
  CHECK(files_under(fs::path(dir) / "llm_cache") == llm_before);
  CHECK(runner.llm_stats().backend_calls == 0);
  std::size_t estimate = 0;
  for (const auto& o : out) {
    CHECK(o.status == "would-run");
    estimate += o.estimated_llm_calls;
  }
  CHECK(estimate > 0);
}

TEST_CASE("full small run, idempotent rerun and staleness checks") {
  const auto dir = testing::scratch_dir("pipeline_run");
  auto cfg = small_config(dir);
  const std::string out = dir + "/run";
  std::size_t estimate = 0;
  {
    Options opt;
    opt.dry_run = true;
    Runner dry(cfg, out, opt);
    for (const auto& o : dry.run_all(default_run_stages())) estimate += o.estimated_llm_calls;
  }
  {
    Runner runner(cfg, out);
    const auto res = runner.run_all(default_run_stages());
    for (const auto& o : res) CHECK(o.status == "ran");
    CHECK(runner.llm_stats().backend_calls == estimate);
    CHECK(fs::exists(out + "/models/tree.json"));
    CHECK(fs::exists(out + "/reports/eval.md"));
    CHECK(fs::exists(out + "/explanations/index.md"));
  }
  {
    Runner again(cfg, out);
    for (const auto& o : again.run_all(default_run_stages())) CHECK(o.status == "skipped");
    CHECK(again.llm_stats().backend_calls == 0);
  }

  Manifest manifest(out + "/manifest.jsonl");
  const auto* weak = manifest.latest("weak-label");
  REQUIRE(weak != nullptr);
  CHECK(weak->params["p_l"].get<double>() == 0.10);
  CHECK(weak->llm_calls > 0);
  CHECK(manifest.producer_of("bsq/curated.jsonl")->stage == "curate-import");

  // A hand-edited intermediate is refused by its consumers.
  {
    const std::string curated = out + "/bsq/curated.jsonl";
    write_file(curated, read_file(curated) + "\n");
    Runner runner(cfg, out);
    try {
      runner.run_stage("weak-label");
      FAIL("expected a staleness error");
    } catch (const StalenessError& e) {
      CHECK(std::string(e.what()).find("curate-import") != std::string::npos);
      CHECK(exit_code_for(e) == 4);
    }
    // Regenerating the producer clears the error.
    Options force;
    force.force = true;
    Runner regen(cfg, out, force);
    CHECK(regen.run_stage("curate-import").status == "ran");
    CHECK(Runner(cfg, out).run_stage("weak-label").status == "skipped");
  }

  // Changing an upstream section blocks downstream stages until rerun.
  {
    auto changed = cfg;
    changed.set("nllfg.epochs=2");
    Runner runner(changed, out);
    try {
      runner.run_stage("build-features");
      FAIL("expected a staleness error");
    } catch (const StalenessError& e) {
      CHECK(std::string(e.what()).find("train-nllfg") != std::string::npos);
    }
    CHECK(runner.run_stage("train-nllfg").status == "ran");
    CHECK(runner.run_stage("build-features").status == "ran");
  }
}

TEST_CASE("missing dependencies name the stages to run") {
  const auto dir = testing::scratch_dir("pipeline_missing");
  auto cfg = small_config(dir);
  Runner runner(cfg, dir + "/run");
  try {
    runner.run_stage("train-tree");
    FAIL("expected a staleness error");
  } catch (const StalenessError& e) {
    const std::string what = e.what();
    CHECK(what.find("select-features") != std::string::npos);
    CHECK(what.find("ingest") < what.find("select-features"));
  }
}

TEST_CASE("exit codes by error family") {
  CHECK(exit_code_for(ValidationError("x")) == 2);
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(TransportError("x", 3)) == 3);
  CHECK(exit_code_for(StalenessError("x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}
