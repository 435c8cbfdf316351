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

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nllf/data_model.hpp"
#include "nllf/io.hpp"
#include "nllf/llm_gateway.hpp"

namespace nllf::pipeline {

/// One JSON config per task, with a section per stage. Relative paths are
/// resolved against the config file's directory.
class RunConfig {
 public:
  RunConfig() = default;
  RunConfig(io::Json json, std::filesystem::path base_dir);
  static RunConfig load(const std::string& path);

  /// `dotted.key=value`; the value is parsed as JSON and falls back to a
  /// plain string.
  void set(const std::string& assignment);

  const io::Json& json() const { return json_; }
  io::Json section(const std::string& name) const;
  std::string resolve(const std::string& path) const;
  std::uint64_t seed() const { return json_.value("seed", std::uint64_t{0}); }
  /// Task preset ("sac", "iad") with field overrides.
  TaskConfig task() const;

 private:
  io::Json json_ = io::Json::object();
  std::filesystem::path base_dir_;
};

/// The ordered stage list understood by the runner. Model stages carry
/// their variant: train-tree, train-encoder, baseline-vanilla,
/// baseline-cot, baseline-self-ask.
const std::vector<std::string>& stage_names();
const std::vector<std::string>& default_run_stages();

struct StageEntry {
  std::string stage;
  std::string run_id;
  std::string status;  // ran | skipped
  std::string config_hash;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  io::OrderedJson params = io::OrderedJson::object();
  std::size_t llm_calls = 0;
  std::string started;
  std::string finished;

  io::OrderedJson to_json() const;
  static StageEntry from_json(const io::Json& j);
};

/// Append-only JSON-Lines log of stage executions.
class Manifest {
 public:
  explicit Manifest(std::string path);
  const std::vector<StageEntry>& entries() const { return entries_; }
  void append(const StageEntry& entry);
  /// Last entry with status "ran" for the stage.
  const StageEntry* latest(const std::string& stage) const;
  /// Last executed entry that listed `path` as an output.
  const StageEntry* producer_of(const std::string& path) const;

 private:
  std::string path_;
  std::vector<StageEntry> entries_;
};

/// SHA-256 of a file, or of the sorted (relative path, file hash) list of
/// a directory.
std::string hash_path(const std::string& path);

struct Options {
  bool dry_run = false;
  bool force = false;
  std::ostream* log = nullptr;
};

struct StageOutcome {
  std::string stage;
  std::string status;  // ran | skipped | would-run | up-to-date | blocked
  std::size_t llm_calls = 0;
  std::size_t estimated_llm_calls = 0;
  std::string detail;
};

class Runner {
 public:
  Runner(RunConfig config, std::string out_dir, Options options = {});
  ~Runner();

  /// Runs one stage, skipping it when its config, inputs and outputs are
  /// unchanged since the last run. Throws StalenessError on a modified or
  /// missing input.
  StageOutcome run_stage(const std::string& stage);
  std::vector<StageOutcome> run_all(const std::vector<std::string>& stages);

  /// Sums over the whole runner lifetime; zero when no gateway was needed.
  llm::GatewayStats llm_stats() const;
  const std::string& out_dir() const { return out_dir_; }
  std::string out_path(const std::string& relative) const;

 private:
  struct Plan;
  Plan plan(const std::string& stage) const;
  StageOutcome dry_run(const std::string& stage, const std::vector<std::string>& planned_before);
  llm::Gateway& gateway();
  llm::CompletionParams completion_params() const;
  std::string config_hash(const std::vector<std::string>& sections) const;
  std::string path_key(const std::string& path) const;
  std::string absolute(const std::string& key) const;
  void say(const std::string& line) const;

  // Stage bodies.
  io::OrderedJson do_ingest();
  io::OrderedJson do_split();
  io::OrderedJson do_gen_bsq();
  io::OrderedJson do_curate_import();
  io::OrderedJson do_augment_bsq();
  io::OrderedJson do_weak_label();
  io::OrderedJson do_train_nllfg();
  io::OrderedJson do_build_features();
  io::OrderedJson do_select_features();
  io::OrderedJson do_train_tree();
  io::OrderedJson do_train_encoder();
  io::OrderedJson do_baseline(const std::string& strategy);
  io::OrderedJson do_evaluate();
  io::OrderedJson do_explain();
  io::OrderedJson do_audit();

  RunConfig config_;
  std::string out_dir_;
  Options options_;
  std::string run_id_;
  std::unique_ptr<llm::Gateway> gateway_;
};

/// Exit code for an exception family: 2 validation, 3 transport,
/// 4 staleness, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace nllf::pipeline
