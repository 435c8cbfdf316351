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

#include "nllf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>

#include "nllf/bsq.hpp"
#include "nllf/evaluation.hpp"
#include "nllf/feature_bank.hpp"
#include "nllf/feature_selection.hpp"
#include "nllf/models.hpp"
#include "nllf/nllfg.hpp"
#include "nllf/weak_labeler.hpp"

namespace fs = std::filesystem;

namespace nllf::pipeline {

// ---------------------------------------------------------------------------
// Config

RunConfig::RunConfig(io::Json json, fs::path base_dir)
    : json_(std::move(json)), base_dir_(std::move(base_dir)) {
  if (!json_.is_object()) throw ConfigError("config must be a JSON object");
}

RunConfig RunConfig::load(const std::string& path) {
  io::Json j;
  try {
    j = io::Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return RunConfig(std::move(j), fs::absolute(path).parent_path());
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  io::Json value;
  try {
    value = io::Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  io::Json* node = &json_;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad config key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = io::Json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

io::Json RunConfig::section(const std::string& name) const {
  if (!json_.contains(name)) return io::Json::object();
  const auto& s = json_.at(name);
  if (!s.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  return s;
}

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_relative()) p = base_dir_ / p;
  return p.lexically_normal().string();
}

TaskConfig RunConfig::task() const {
  const auto s = section("task");
  const std::string preset = s.value("preset", "");
  TaskConfig t;
  if (preset == "sac") t = TaskConfig::abstract_screening();
  else if (preset == "iad") t = TaskConfig::incoherence_detection();
  else if (!preset.empty()) throw ConfigError("unknown task preset '" + preset + "'");
  t.name = s.value("name", t.name.empty() ? std::string("task") : t.name);
  t.p_q = s.value("p_q", t.p_q);
  t.p_l = s.value("p_l", t.p_l);
  t.curated_count = s.value("curated_count", t.curated_count);
  t.augmented_count = s.value("augmented_count", t.augmented_count);
  if (s.contains("metric_mode")) t.metric_mode = metric_mode_from_string(s["metric_mode"].get<std::string>());
  t.positive_alias = s.value("positive_alias", t.positive_alias);
  t.negative_alias = s.value("negative_alias", t.negative_alias);
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Manifest

io::OrderedJson StageEntry::to_json() const {
  io::OrderedJson j;
  j["stage"] = stage;
  j["run_id"] = run_id;
  j["status"] = status;
  j["config_hash"] = config_hash;
  j["inputs"] = io::OrderedJson::object();
  for (const auto& [k, v] : inputs) j["inputs"][k] = v;
  j["outputs"] = io::OrderedJson::object();
  for (const auto& [k, v] : outputs) j["outputs"][k] = v;
  j["params"] = params;
  j["llm_calls"] = llm_calls;
  j["started"] = started;
  j["finished"] = finished;
  return j;
}

StageEntry StageEntry::from_json(const io::Json& j) {
  StageEntry e;
  e.stage = j.at("stage").get<std::string>();
  e.run_id = j.value("run_id", "");
  e.status = j.value("status", "ran");
  e.config_hash = j.value("config_hash", "");
  const auto inputs = j.value("inputs", io::Json::object());
  const auto outputs = j.value("outputs", io::Json::object());
  for (const auto& [k, v] : inputs.items()) e.inputs[k] = v.get<std::string>();
  for (const auto& [k, v] : outputs.items()) e.outputs[k] = v.get<std::string>();
  if (j.contains("params")) e.params = io::OrderedJson::parse(j["params"].dump());
  e.llm_calls = j.value("llm_calls", std::size_t{0});
  e.started = j.value("started", "");
  e.finished = j.value("finished", "");
  return e;
}

Manifest::Manifest(std::string path) : path_(std::move(path)) {
  if (!file_exists(path_)) return;
  io::for_each_jsonl(path_, [&](const io::OrderedJson& j, std::size_t) {
    entries_.push_back(StageEntry::from_json(io::Json::parse(j.dump())));
  });
}

void Manifest::append(const StageEntry& entry) {
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw InputError("cannot append to '" + path_ + "'");
  out << entry.to_json().dump() << "\n";
  entries_.push_back(entry);
}

const StageEntry* Manifest::latest(const std::string& stage) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->stage == stage && it->status == "ran") return &*it;
  }
  return nullptr;
}

const StageEntry* Manifest::producer_of(const std::string& path) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->status == "ran" && it->outputs.count(path)) return &*it;
  }
  return nullptr;
}

std::string hash_path(const std::string& path) {
  if (!fs::is_directory(path)) return sha256_file(path);
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) {
      files.emplace_back(fs::relative(e.path(), path).generic_string(), sha256_file(e.path().string()));
    }
  }
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& [rel, h] : files) listing += rel + '\0' + h + '\n';
  return sha256_hex(listing);
}

// ---------------------------------------------------------------------------
// Stage table

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{
      "ingest",         "split",           "gen-bsq",        "curate-import",    "augment-bsq",
      "weak-label",     "train-nllfg",     "build-features", "select-features",  "train-tree",
      "train-encoder",  "baseline-vanilla", "baseline-cot",  "baseline-self-ask", "evaluate",
      "explain",        "audit"};
  return names;
}

const std::vector<std::string>& default_run_stages() {
  static const std::vector<std::string> names{
      "ingest",      "split",          "gen-bsq",         "curate-import", "augment-bsq", "weak-label",
      "train-nllfg", "build-features", "select-features", "train-tree",    "evaluate",    "explain"};
  return names;
}

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool path_present(const std::string& p) { return fs::exists(p); }

std::vector<std::string> matrix_files(const std::string& dir, const std::vector<std::string>& splits) {
  std::vector<std::string> out;
  for (const auto& s : splits) {
    out.push_back(dir + "/" + s + ".csv");
    out.push_back(dir + "/" + s + ".csv.descriptors.json");
  }
  return out;
}

std::vector<Label> golds_of(const Corpus& c) {
  std::vector<Label> out;
  for (const auto& e : c) {
    if (!e.gold) throw ValidationError("example '" + e.id + "' has no gold label");
    out.push_back(*e.gold);
  }
  return out;
}

Corpus concat(const Corpus& a, const Corpus& b) {
  Corpus out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<std::string> families_of(const io::Json& s, const std::string& key,
                                     std::vector<std::string> fallback) {
  if (!s.contains(key)) return fallback;
  auto v = s.at(key).get<std::vector<std::string>>();
  for (const auto& f : v) features::feature_kind_from_string(f);
  return v;
}

features::FeatureMatrix filter_families(const features::FeatureMatrix& m,
                                        const std::vector<std::string>& families) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto kind = features::to_string(m.descriptors[c].kind);
    if (std::find(families.begin(), families.end(), kind) != families.end()) cols.push_back(c);
  }
  return m.select_columns(cols);
}

void write_predictions(const std::string& path, const Corpus& examples, const std::vector<Label>& pred,
                       const std::vector<char>& abstained = {}) {
  std::string text;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    io::OrderedJson j;
    j["id"] = examples[i].id;
    j["prediction"] = to_string(pred[i]);
    if (examples[i].gold) j["gold"] = to_string(*examples[i].gold);
    if (!abstained.empty()) j["abstained"] = abstained[i] != 0;
    text += j.dump() + "\n";
  }
  write_file(path, text);
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_' ? c : '_');
  return out.empty() ? "_" : out;
}

std::size_t round_size(double frac, std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))));
}

}  // namespace

struct Runner::Plan {
  std::vector<std::string> sections;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> requires_stages;
  std::function<io::OrderedJson()> body;
  std::function<std::size_t()> estimate = [] { return std::size_t{0}; };
};

Runner::Runner(RunConfig config, std::string out_dir, Options options)
    : config_(std::move(config)), out_dir_(fs::absolute(out_dir).lexically_normal().string()),
      options_(options) {
  run_id_ = sha256_hex(utc_now() + out_dir_ + std::to_string(reinterpret_cast<std::uintptr_t>(this))).substr(0, 12);
}

Runner::~Runner() = default;

std::string Runner::out_path(const std::string& relative) const {
  return (fs::path(out_dir_) / relative).lexically_normal().string();
}

std::string Runner::absolute(const std::string& key) const {
  return fs::path(key).is_absolute() ? key : out_path(key);
}

std::string Runner::path_key(const std::string& path) const { return path; }

void Runner::say(const std::string& line) const {
  if (options_.log) *options_.log << line << "\n";
}

std::string Runner::config_hash(const std::vector<std::string>& sections) const {
  io::Json j = io::Json::object();
  j["seed"] = config_.seed();
  for (const auto& s : sections) j[s] = config_.json().contains(s) ? config_.json().at(s) : io::Json();
  return sha256_hex(j.dump());
}

llm::Gateway& Runner::gateway() {
  if (options_.dry_run) throw InternalError("dry run must not reach the LLM gateway");
  if (!gateway_) {
    const auto s = config_.section("llm");
    auto backend = llm::make_backend(s);
    const std::string cache = s.contains("cache_dir") ? config_.resolve(s["cache_dir"].get<std::string>())
                                                      : out_path("llm_cache");
    llm::RetryPolicy retry;
    retry.max_attempts = s.value("max_attempts", retry.max_attempts);
    retry.base_delay = std::chrono::milliseconds(s.value("base_delay_ms", 500));
    gateway_ = std::make_unique<llm::Gateway>(backend, llm::ResponseCache(cache), retry,
                                              s.value("max_in_flight", std::size_t{4}));
  }
  return *gateway_;
}

llm::CompletionParams Runner::completion_params() const {
  const auto s = config_.section("llm");
  llm::CompletionParams p;
  p.temperature = s.value("temperature", p.temperature);
  p.max_tokens = s.value("max_tokens", p.max_tokens);
  p.model_id = s.value("model_id", p.model_id);
  return p;
}

llm::GatewayStats Runner::llm_stats() const { return gateway_ ? gateway_->stats() : llm::GatewayStats{}; }

// ---------------------------------------------------------------------------
// Plans

Runner::Plan Runner::plan(const std::string& stage) const {
  Plan p;
  auto self = const_cast<Runner*>(this);
  const auto task = config_.task();
  // Rough pool size for dry-run estimates: the non-test share of whatever
  // corpus is visible.
  auto pool_estimate = [this]() -> std::size_t {
    try {
      if (path_present(out_path("split.json"))) {
        const auto corpus = load_corpus(out_path("corpus.jsonl"));
        const auto part = load_split_manifest(out_path("split.json"), corpus);
        return part.train.size() + part.val.size();
      }
      std::string src = out_path("corpus.jsonl");
      if (!path_present(src)) src = config_.resolve(config_.section("corpus").value("path", ""));
      if (src.empty() || !path_present(src)) return 0;
      std::size_t n = 0;
      for (const auto& line : split_lines(read_file(src))) n += trim(line).empty() ? 0 : 1;
      const double test = config_.section("split").value("test_frac", 0.2);
      return n - static_cast<std::size_t>(std::floor(test * static_cast<double>(n)));
    } catch (const Error&) {
      return 0;
    }
  };

  if (stage == "ingest") {
    const auto s = config_.section("corpus");
    if (!s.contains("path")) throw ConfigError("corpus.path is required");
    p.sections = {"corpus"};
    p.inputs = {config_.resolve(s["path"].get<std::string>())};
    p.outputs = {"corpus.jsonl"};
    p.body = [self] { return self->do_ingest(); };
  } else if (stage == "split") {
    const auto s = config_.section("split");
    p.sections = {"split"};
    p.inputs = {"corpus.jsonl"};
    if (s.contains("fixed_test_ids")) p.inputs.push_back(config_.resolve(s["fixed_test_ids"].get<std::string>()));
    p.outputs = {"split.json"};
    p.requires_stages = {"ingest"};
    p.body = [self] { return self->do_split(); };
  } else if (stage == "gen-bsq") {
    const auto s = config_.section("bsq");
    p.sections = {"task", "bsq", "llm"};
    p.inputs = {"corpus.jsonl", "split.json",
                config_.resolve(s.value("template", std::string("templates/bsq_generation.json")))};
    p.outputs = {"bsq/raw.jsonl", "bsq/review.csv"};
    p.requires_stages = {"ingest", "split"};
    p.body = [self] { return self->do_gen_bsq(); };
    p.estimate = [=, this] { return pool_estimate() ? round_size(task.p_q, pool_estimate()) : 0; };
  } else if (stage == "curate-import") {
    const auto s = config_.section("bsq");
    p.sections = {"bsq"};
    p.inputs = {"bsq/raw.jsonl"};
    if (s.contains("curated_review")) p.inputs.push_back(config_.resolve(s["curated_review"].get<std::string>()));
    p.outputs = {"bsq/curated.jsonl"};
    p.requires_stages = {"gen-bsq"};
    p.body = [self] { return self->do_curate_import(); };
  } else if (stage == "augment-bsq") {
    const auto a = config_.section("bsq").value("augment", io::Json::object());
    p.sections = {"bsq"};
    p.inputs = {"bsq/curated.jsonl", "bsq/raw.jsonl"};
    for (const char* k : {"linguistic", "human", "paraphrases"}) {
      if (a.contains(k)) p.inputs.push_back(config_.resolve(a[k].get<std::string>()));
    }
    p.outputs = {"bsq/augmented.jsonl"};
    p.requires_stages = {"curate-import"};
    p.body = [self] { return self->do_augment_bsq(); };
  } else if (stage == "weak-label") {
    const auto s = config_.section("weak_label");
    const auto mode = weak::label_mode_from_string(s.value("mode", "direct"));
    const std::string deflt = mode == weak::LabelMode::cot ? "templates/weak_label_cot.json"
                                                          : "templates/weak_label_direct.json";
    p.sections = {"task", "weak_label", "llm"};
    p.inputs = {"corpus.jsonl", "split.json", "bsq/curated.jsonl", config_.resolve(s.value("template", deflt))};
    p.outputs = {"weak/labels.jsonl", "weak/failures.jsonl", "weak/histogram.csv", "weak/histogram.txt"};
    p.requires_stages = {"ingest", "split", "gen-bsq", "curate-import"};
    p.body = [self] { return self->do_weak_label(); };
    p.estimate = [=, this] {
      std::size_t questions = task.curated_count;
      try {
        if (path_present(out_path("bsq/curated.jsonl"))) questions = bsq::load_bsqs(out_path("bsq/curated.jsonl")).size();
      } catch (const Error&) {
      }
      const auto pool = pool_estimate();
      return pool ? round_size(task.p_l, pool) * questions : 0;
    };
  } else if (stage == "train-nllfg") {
    p.sections = {"nllfg"};
    p.inputs = {"corpus.jsonl", "split.json", "bsq/curated.jsonl", "weak/labels.jsonl"};
    p.outputs = {"nllfg"};
    p.requires_stages = {"ingest", "split", "gen-bsq", "curate-import", "weak-label"};
    p.body = [self] { return self->do_train_nllfg(); };
  } else if (stage == "build-features") {
    const auto s = config_.section("features");
    const auto fam = families_of(s, "families", {"nllf", "ef"});
    p.sections = {"features"};
    p.inputs = {"corpus.jsonl", "split.json"};
    p.requires_stages = {"ingest", "split"};
    if (std::count(fam.begin(), fam.end(), "nllf")) {
      p.inputs.push_back("bsq/augmented.jsonl");
      p.inputs.push_back("nllfg");
      for (const char* r : {"gen-bsq", "curate-import", "augment-bsq", "weak-label", "train-nllfg"}) {
        p.requires_stages.push_back(r);
      }
    }
    if (std::count(fam.begin(), fam.end(), "ef")) {
      if (!s.contains("expert_rules")) throw ConfigError("features.expert_rules is required for the ef family");
      p.inputs.push_back(config_.resolve(s["expert_rules"].get<std::string>()));
    }
    p.outputs = matrix_files("features", {"train", "val", "test"});
    if (std::count(fam.begin(), fam.end(), "bong")) p.outputs.push_back("features/bong.json");
    p.body = [self] { return self->do_build_features(); };
  } else if (stage == "select-features") {
    p.sections = {"selection", "task"};
    p.inputs = matrix_files("features", {"train", "val", "test"});
    p.inputs.insert(p.inputs.begin(), {"corpus.jsonl", "split.json"});
    p.outputs = matrix_files("selection", {"train", "val", "test"});
    p.outputs.push_back("selection/report.json");
    p.requires_stages = {"build-features"};
    p.body = [self] { return self->do_select_features(); };
  } else if (stage == "train-tree") {
    const auto s = config_.section("tree");
    const std::string dir = s.value("input", "selected") == "selected" ? "selection" : "features";
    p.sections = {"tree"};
    p.inputs = matrix_files(dir, {"train", "test"});
    p.inputs.insert(p.inputs.begin(), {"corpus.jsonl", "split.json"});
    p.outputs = {"models/tree.json", "models/tree.dot", "predictions/tree.jsonl"};
    p.requires_stages = {dir == "selection" ? "select-features" : "build-features"};
    p.body = [self] { return self->do_train_tree(); };
  } else if (stage == "train-encoder") {
    const auto s = config_.section("encoder");
    const bool augmented = s.value("variant", "augmented") == "augmented";
    const std::string dir = s.value("input", "selected") == "selected" ? "selection" : "features";
    p.sections = {"encoder"};
    p.inputs = {"corpus.jsonl", "split.json"};
    p.requires_stages = {"ingest", "split"};
    if (augmented) {
      for (const auto& f : matrix_files(dir, {"train", "val", "test"})) p.inputs.push_back(f);
      p.requires_stages.push_back(dir == "selection" ? "select-features" : "build-features");
    }
    p.outputs = {"models/encoder", "predictions/encoder.jsonl"};
    p.body = [self] { return self->do_train_encoder(); };
  } else if (stage.rfind("baseline-", 0) == 0) {
    const std::string strategy = stage.substr(9);
    models::strategy_from_string(strategy);
    const auto s = config_.section("baselines");
    const auto strategies = s.value("prompts", io::Json::object());
    const std::string key = strategy == "self-ask" ? "self_ask" : strategy;
    if (!strategies.contains(key)) throw ConfigError("baselines.prompts." + key + " is not configured");
    p.sections = {"task", "llm", "baselines"};
    p.inputs = {"corpus.jsonl", "split.json", config_.resolve(strategies[key].get<std::string>())};
    p.outputs = {"baselines/" + strategy + ".transcripts.jsonl", "predictions/baseline-" + strategy + ".jsonl"};
    p.requires_stages = {"ingest", "split"};
    p.body = [self, strategy] { return self->do_baseline(strategy); };
    p.estimate = [=, this] {
      std::size_t n = 0;
      try {
        if (path_present(out_path("split.json"))) {
          n = load_split_manifest(out_path("split.json"), load_corpus(out_path("corpus.jsonl"))).test.size();
        }
      } catch (const Error&) {
      }
      if (s.contains("limit")) n = std::min<std::size_t>(n, s["limit"].get<std::size_t>());
      return strategy == "self-ask" ? n * 10 : n;
    };
  } else if (stage == "evaluate") {
    const auto s = config_.section("evaluate");
    const auto names = s.value("models", std::vector<std::string>{"tree"});
    p.sections = {"evaluate", "task"};
    for (const auto& m : names) {
      p.inputs.push_back("predictions/" + m + ".jsonl");
      p.requires_stages.push_back(m == "tree" ? "train-tree" : m == "encoder" ? "train-encoder" : m);
    }
    p.outputs = {"reports/eval.json", "reports/eval.md"};
    p.body = [self] { return self->do_evaluate(); };
  } else if (stage == "explain") {
    const std::string dir = config_.section("tree").value("input", "selected") == "selected" ? "selection" : "features";
    p.sections = {"explain", "tree"};
    p.inputs = matrix_files(dir, {"test"});
    p.inputs.insert(p.inputs.begin(), {"corpus.jsonl", "split.json", "models/tree.json"});
    p.outputs = {"explanations"};
    p.requires_stages = {"train-tree"};
    p.body = [self] { return self->do_explain(); };
  } else if (stage == "audit") {
    const auto s = config_.section("audit");
    if (!s.contains("verdicts")) throw ConfigError("audit.verdicts is required");
    p.sections = {"audit"};
    p.inputs = {config_.resolve(s["verdicts"].get<std::string>())};
    if (!s.contains("weak_val_accuracy") && path_present(out_path("nllfg"))) p.inputs.push_back("nllfg");
    p.outputs = {"reports/audit.json", "reports/audit.md"};
    p.body = [self] { return self->do_audit(); };
  } else {
    throw ConfigError("unknown stage '" + stage + "'");
  }
  return p;
}

StageOutcome Runner::run_stage(const std::string& stage) {
  if (options_.dry_run) return dry_run(stage, {});
  const Plan p = plan(stage);
  Manifest manifest(out_path("manifest.jsonl"));

  // Missing inputs: name the stages that still have to run, in order.
  std::vector<std::string> missing;
  for (const auto& in : p.inputs) {
    if (!path_present(absolute(in))) missing.push_back(in);
  }
  if (!missing.empty()) {
    // Every upstream stage, direct or transitive.
    std::set<std::string> upstream;
    std::vector<std::string> todo = p.requires_stages;
    while (!todo.empty()) {
      const std::string s = todo.back();
      todo.pop_back();
      if (!upstream.insert(s).second) continue;
      for (const auto& r : plan(s).requires_stages) todo.push_back(r);
    }
    std::vector<std::string> needed;
    for (const auto& s : stage_names()) {
      if (!upstream.count(s)) continue;
      const Plan up = plan(s);
      const bool done = std::all_of(up.outputs.begin(), up.outputs.end(),
                                    [&](const std::string& o) { return path_present(absolute(o)); });
      if (!done) needed.push_back(s);
    }
    throw StalenessError("stage '" + stage + "' is missing " + join(missing, ", ") +
                         (needed.empty() ? std::string() : "; run these stages first: " + join(needed, ", ")));
  }

  std::map<std::string, std::string> input_hashes;
  for (const auto& in : p.inputs) {
    const std::string h = hash_path(absolute(in));
    input_hashes[in] = h;
    if (const auto* prod = manifest.producer_of(in)) {
      const auto rec = prod->outputs.at(in);
      if (rec != h) {
        throw StalenessError("'" + in + "' changed since stage '" + prod->stage + "' wrote it (recorded " +
                             rec.substr(0, 12) + ", found " + h.substr(0, 12) + "); rerun '" + prod->stage +
                             "' to regenerate it");
      }
      if (prod->stage != stage && plan(prod->stage).sections.size() &&
          prod->config_hash != config_hash(plan(prod->stage).sections)) {
        throw StalenessError("the configuration of stage '" + prod->stage + "' changed after it wrote '" + in +
                             "'; rerun '" + prod->stage + "' first");
      }
    }
  }

  const std::string chash = config_hash(p.sections);
  if (!options_.force) {
    if (const auto* last = manifest.latest(stage)) {
      bool fresh = last->config_hash == chash && last->inputs == input_hashes;
      for (const auto& o : p.outputs) {
        if (!fresh) break;
        auto it = last->outputs.find(o);
        fresh = it != last->outputs.end() && path_present(absolute(o)) && hash_path(absolute(o)) == it->second;
      }
      if (fresh) {
        StageEntry e = *last;
        e.run_id = run_id_;
        e.status = "skipped";
        e.llm_calls = 0;
        e.started = e.finished = utc_now();
        manifest.append(e);
        say(stage + ": up to date, skipped");
        return StageOutcome{stage, "skipped", 0, 0, ""};
      }
    }
  }

  say(stage + ": running");
  StageEntry e;
  e.stage = stage;
  e.run_id = run_id_;
  e.status = "ran";
  e.config_hash = chash;
  e.inputs = input_hashes;
  e.started = utc_now();
  for (const auto& o : p.outputs) {
    const fs::path out = absolute(o);
    fs::create_directories(fs::path(o).has_extension() ? out.parent_path() : out);
  }
  const auto before = llm_stats().backend_calls;
  e.params = p.body();
  e.llm_calls = llm_stats().backend_calls - before;
  for (const auto& o : p.outputs) {
    if (!path_present(absolute(o))) throw InternalError("stage '" + stage + "' did not write " + o);
    e.outputs[o] = hash_path(absolute(o));
  }
  e.finished = utc_now();
  manifest.append(e);
  say(stage + ": done (" + std::to_string(e.llm_calls) + " LLM calls)");
  return StageOutcome{stage, "ran", e.llm_calls, 0, ""};
}

StageOutcome Runner::dry_run(const std::string& stage, const std::vector<std::string>& planned_before) {
  const Plan p = plan(stage);
  const Manifest manifest(out_path("manifest.jsonl"));
  StageOutcome o{stage, "would-run", 0, 0, ""};
  std::vector<std::string> missing;
  for (const auto& in : p.inputs) {
    if (path_present(absolute(in))) continue;
    bool upstream = false;
    for (const auto& s : planned_before) {
      const auto outs = plan(s).outputs;
      upstream = upstream || std::find(outs.begin(), outs.end(), in) != outs.end();
    }
    if (!upstream) missing.push_back(in);
  }
  if (!missing.empty()) {
    o.status = "blocked";
    o.detail = "missing " + join(missing, ", ");
  } else if (!options_.force && planned_before.empty()) {
    if (const auto* last = manifest.latest(stage)) {
      bool fresh = last->config_hash == config_hash(p.sections);
      for (const auto& in : p.inputs) {
        if (!fresh) break;
        auto it = last->inputs.find(in);
        fresh = it != last->inputs.end() && hash_path(absolute(in)) == it->second;
      }
      for (const auto& out : p.outputs) {
        if (!fresh) break;
        auto it = last->outputs.find(out);
        fresh = it != last->outputs.end() && path_present(absolute(out)) && hash_path(absolute(out)) == it->second;
      }
      if (fresh) o.status = "up-to-date";
    }
  }
  if (o.status == "would-run") o.estimated_llm_calls = p.estimate();
  say(stage + ": " + o.status + (o.detail.empty() ? "" : " (" + o.detail + ")") +
      "; estimated LLM calls: " + std::to_string(o.estimated_llm_calls));
  return o;
}

std::vector<StageOutcome> Runner::run_all(const std::vector<std::string>& stages) {
  std::vector<StageOutcome> out;
  std::vector<std::string> planned;
  for (const auto& s : stages) {
    if (options_.dry_run) {
      // Upstream stages in the same plan will produce missing inputs.
      auto o = dry_run(s, planned);
      planned.push_back(s);
      out.push_back(o);
      continue;
    }
    out.push_back(run_stage(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage bodies

namespace {

struct Loaded {
  Corpus corpus;
  Partition part;
};

Loaded load_partition(const Runner& r) {
  Loaded l;
  l.corpus = load_corpus(r.out_path("corpus.jsonl"));
  l.part = load_split_manifest(r.out_path("split.json"), l.corpus);
  return l;
}

}  // namespace

io::OrderedJson Runner::do_ingest() {
  const auto s = config_.section("corpus");
  const auto schema = s.value("schema", std::vector<std::string>{});
  const auto corpus = load_corpus(config_.resolve(s["path"].get<std::string>()), schema);
  if (corpus.empty()) throw ValidationError("corpus is empty");
  save_corpus(out_path("corpus.jsonl"), corpus);
  std::size_t pos = 0;
  std::size_t labeled = 0;
  for (const auto& e : corpus) {
    if (e.gold) {
      ++labeled;
      pos += *e.gold == Label::positive;
    }
  }
  io::OrderedJson j;
  j["examples"] = corpus.size();
  j["labeled"] = labeled;
  j["positive"] = pos;
  return j;
}

io::OrderedJson Runner::do_split() {
  const auto s = config_.section("split");
  SplitSpec spec;
  spec.train_frac = s.value("train_frac", spec.train_frac);
  spec.val_frac = s.value("val_frac", spec.val_frac);
  spec.test_frac = s.value("test_frac", spec.test_frac);
  spec.seed = s.value("seed", config_.seed());
  if (s.value("mode", "random") == "fixed_test") {
    spec.mode = SplitMode::fixed_test;
    if (!s.contains("fixed_test_ids")) throw ConfigError("split.fixed_test_ids is required in fixed_test mode");
    for (const auto& line : split_lines(read_file(config_.resolve(s["fixed_test_ids"].get<std::string>())))) {
      if (!trim(line).empty()) spec.fixed_test_ids.push_back(trim(line));
    }
  }
  spec.validate();
  const auto corpus = load_corpus(out_path("corpus.jsonl"));
  const auto part = split(corpus, spec);
  save_split_manifest(out_path("split.json"), part, spec);
  io::OrderedJson j;
  j["seed"] = spec.seed;
  j["train"] = part.train.size();
  j["val"] = part.val.size();
  j["test"] = part.test.size();
  return j;
}

io::OrderedJson Runner::do_gen_bsq() {
  const auto task = config_.task();
  const auto s = config_.section("bsq");
  const auto l = load_partition(*this);
  const auto pool = concat(l.part.train, l.part.val);
  const std::uint64_t seed = s.value("seed", config_.seed());
  const auto samples = sample_fraction(pool, task.p_q, seed);
  const auto tmpl = llm::PromptTemplate::from_json(
      io::Json::parse(read_file(config_.resolve(s.value("template", std::string("templates/bsq_generation.json"))))));
  const auto res = bsq::generate_raw_bsqs(samples, tmpl, s.value("per_sample", std::size_t{5}), gateway(),
                                          completion_params());
  bsq::save_bsqs(out_path("bsq/raw.jsonl"), res.raw);
  bsq::export_for_review(res.raw, out_path("bsq/review.csv"), s.value("near_duplicate_threshold", 0.15));
  io::OrderedJson j;
  j["p_q"] = task.p_q;
  j["seed"] = seed;
  j["samples"] = samples.size();
  j["raw_questions"] = res.raw.size();
  j["parsed_before_dedup"] = res.parsed_before_dedup;
  j["misses"] = res.misses;
  return j;
}

io::OrderedJson Runner::do_curate_import() {
  const auto task = config_.task();
  const auto s = config_.section("bsq");
  const auto raw = bsq::load_bsqs(out_path("bsq/raw.jsonl"));
  std::string review;
  if (s.contains("curated_review")) {
    review = config_.resolve(s["curated_review"].get<std::string>());
  } else {
    // No expert review supplied: every raw question is kept as is.
    review = out_path("bsq/identity_review.csv");
    bsq::export_identity_review(raw, review);
  }
  const auto curated = bsq::import_curated(review, raw);
  if (task.curated_count && curated.size() != task.curated_count) {
    warn("curated " + std::to_string(curated.size()) + " questions; the task config expects C = " +
         std::to_string(task.curated_count));
  }
  bsq::save_bsqs(out_path("bsq/curated.jsonl"), curated);
  io::OrderedJson j;
  j["review"] = s.contains("curated_review") ? "expert" : "identity";
  j["curated"] = curated.size();
  return j;
}

io::OrderedJson Runner::do_augment_bsq() {
  const auto task = config_.task();
  const auto a = config_.section("bsq").value("augment", io::Json::object());
  const auto curated = bsq::load_bsqs(out_path("bsq/curated.jsonl"));
  bsq::AugmentSources extras;
  if (a.value("include_raw", false)) extras.raw_pool = bsq::load_bsqs(out_path("bsq/raw.jsonl"));
  if (a.contains("linguistic")) extras.linguistic = bsq::load_bsqs(config_.resolve(a["linguistic"].get<std::string>()));
  if (a.contains("human")) extras.human = bsq::load_bsqs(config_.resolve(a["human"].get<std::string>()));
  if (a.contains("paraphrases")) extras.paraphrases = bsq::load_bsqs(config_.resolve(a["paraphrases"].get<std::string>()));
  const auto augmented = bsq::augment(curated, extras);
  if (task.augmented_count && augmented.size() != task.augmented_count) {
    warn("augmented set has " + std::to_string(augmented.size()) + " questions; the task config expects C+ = " +
         std::to_string(task.augmented_count));
  }
  bsq::save_bsqs(out_path("bsq/augmented.jsonl"), augmented);
  io::OrderedJson j;
  j["curated"] = curated.size();
  j["augmented"] = augmented.size();
  return j;
}

io::OrderedJson Runner::do_weak_label() {
  const auto task = config_.task();
  const auto s = config_.section("weak_label");
  const auto mode = weak::label_mode_from_string(s.value("mode", "direct"));
  const std::string deflt = mode == weak::LabelMode::cot ? "templates/weak_label_cot.json"
                                                        : "templates/weak_label_direct.json";
  const auto tmpl = llm::PromptTemplate::from_json(io::Json::parse(read_file(config_.resolve(s.value("template", deflt)))));
  weak::Lexicon lexicon = weak::Lexicon::english();
  if (s.contains("lexicon")) {
    const auto& lx = s["lexicon"];
    if (lx.is_string()) {
      if (lx == "spanish") lexicon = weak::Lexicon::spanish();
      else if (lx != "english") throw ConfigError("unknown lexicon '" + lx.get<std::string>() + "'");
    } else {
      lexicon = weak::Lexicon::from_json(lx);
    }
  }
  const auto l = load_partition(*this);
  const auto pool = concat(l.part.train, l.part.val);
  const std::uint64_t seed = s.value("seed", config_.seed() + 1);
  const auto sample = sample_fraction(pool, task.p_l, seed);
  const auto curated = bsq::active_only(bsq::load_bsqs(out_path("bsq/curated.jsonl")));
  const auto res = weak::weak_label(sample, curated, mode, tmpl, gateway(), completion_params(), lexicon);
  weak::save_labels(out_path("weak/labels.jsonl"), res.labels);
  weak::save_failures(out_path("weak/failures.jsonl"), res.failures);
  const auto hist = weak::label_histogram(res, curated);
  write_file(out_path("weak/histogram.csv"), weak::histogram_csv(hist));
  write_file(out_path("weak/histogram.txt"), weak::histogram_chart(hist));
  io::OrderedJson j;
  j["p_l"] = task.p_l;
  j["seed"] = seed;
  j["mode"] = weak::to_string(mode);
  j["examples"] = sample.size();
  j["questions"] = curated.size();
  j["labels"] = res.labels.size();
  j["failures"] = res.failures.size();
  return j;
}

io::OrderedJson Runner::do_train_nllfg() {
  const auto s = config_.section("nllfg");
  io::Json hj = s;
  if (!hj.contains("seed")) hj["seed"] = config_.seed();
  const auto hyper = nllfg::Hyper::from_json(hj);
  const auto l = load_partition(*this);
  const auto curated = bsq::load_bsqs(out_path("bsq/curated.jsonl"));
  const auto labels = weak::load_labels(out_path("weak/labels.jsonl"));
  const auto pairs = nllfg::build_training_set(labels, l.corpus, curated, hyper.seed, s.value("val_frac", 0.1));
  auto res = nllfg::train(pairs, hyper);
  const double val_acc = pairs.val.empty() ? 0.0 : nllfg::accuracy(res.model, pairs.val);
  res.model.manifest["val_accuracy"] = val_acc;
  const std::string dir = out_path("nllfg");
  fs::remove_all(dir);
  nllfg::save(res.model, dir);
  nllfg::save_pairs(out_path("nllfg/pairs_train.jsonl"), pairs.train);
  nllfg::save_pairs(out_path("nllfg/pairs_val.jsonl"), pairs.val);
  io::OrderedJson j;
  j["train_pairs"] = pairs.train.size();
  j["val_pairs"] = pairs.val.size();
  j["val_accuracy"] = val_acc;
  j["selected_epoch"] = res.report.selected_epoch;
  j["model_sha256"] = res.model.hash();
  return j;
}

io::OrderedJson Runner::do_build_features() {
  const auto s = config_.section("features");
  const auto fam = families_of(s, "families", {"nllf", "ef"});
  const auto l = load_partition(*this);

  std::optional<nllfg::Model> model;
  bsq::BsqSet questions;
  std::unique_ptr<features::NllfCache> cache;
  std::optional<features::RuleRegistry> rules;
  std::optional<features::BongVocabulary> bong;
  io::OrderedJson j;
  for (const auto& f : fam) {
    if (f == "nllf") {
      model = nllfg::load(out_path("nllfg"));
      questions = bsq::load_bsqs(out_path("bsq/augmented.jsonl"));
      const std::string cache_path = s.contains("nllf_cache") ? config_.resolve(s["nllf_cache"].get<std::string>())
                                                              : out_path("cache/nllf.jsonl");
      fs::create_directories(fs::path(cache_path).parent_path());
      cache = std::make_unique<features::NllfCache>(cache_path);
    } else if (f == "ef") {
      rules = features::load_registry(config_.resolve(s["expert_rules"].get<std::string>()));
    } else if (f == "bong") {
      features::BongParams bp;
      const auto b = s.value("bong", io::Json::object());
      bp.max_features = b.value("max_features", bp.max_features);
      bp.ngram_min = b.value("ngram_min", bp.ngram_min);
      bp.ngram_max = b.value("ngram_max", bp.ngram_max);
      std::vector<std::string> texts;
      for (const auto& e : l.part.train) texts.push_back(e.premise());
      bong = features::fit_bong(texts, bp);
      write_file(out_path("features/bong.json"), features::bong_to_json(*bong).dump(2) + "\n");
      j["bong_terms"] = bong->terms.size();
    }
  }
  const std::vector<std::pair<std::string, const Corpus*>> splits{
      {"train", &l.part.train}, {"val", &l.part.val}, {"test", &l.part.test}};
  for (const auto& [name, rows] : splits) {
    std::vector<features::FeatureMatrix> parts;
    for (const auto& f : fam) {
      if (f == "nllf") parts.push_back(features::build_nllf(*model, *rows, questions, cache.get()));
      else if (f == "ef") parts.push_back(features::build_ef(*rules, *rows));
      else parts.push_back(features::build_bong(*bong, *rows));
    }
    const auto m = features::assemble(parts);
    features::save_matrix(out_path("features/" + name + ".csv"), m);
    j[name + "_columns"] = m.cols();
  }
  if (cache) {
    cache->flush();
    j["nllf_scoring_calls"] = cache->scoring_calls();
  }
  j["families"] = fam;
  return j;
}

io::OrderedJson Runner::do_select_features() {
  const auto task = config_.task();
  const auto s = config_.section("selection");
  const auto fam = families_of(s, "families", {"nllf"});
  io::Json gj = s.value("ga", io::Json::object());
  if (!gj.contains("seed")) gj["seed"] = config_.seed();
  const auto ga = selection::GaParams::from_json(gj);
  const std::size_t folds = s.value("folds", std::size_t{15});
  const auto l = load_partition(*this);

  const auto train = features::load_matrix(out_path("features/train.csv"));
  std::vector<std::size_t> cand;
  for (std::size_t c = 0; c < train.cols(); ++c) {
    const auto kind = features::to_string(train.descriptors[c].kind);
    if (std::find(fam.begin(), fam.end(), kind) != fam.end()) cand.push_back(c);
  }
  if (cand.empty()) throw ConfigError("no feature columns of the selected families to choose from");
  const auto report = selection::select(train.select_columns(cand), golds_of(l.part.train), folds,
                                        task.metric_mode, ga);
  std::set<std::string> drop;
  for (std::size_t k = 0; k < cand.size(); ++k) {
    if (!report.selected[k]) drop.insert(train.descriptors[cand[k]].id);
  }
  write_file(out_path("selection/report.json"), selection::report_to_json(report).dump(2) + "\n");
  for (const char* name : {"train", "val", "test"}) {
    const auto m = features::load_matrix(out_path(std::string("features/") + name + ".csv"));
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!drop.count(m.descriptors[c].id)) keep.push_back(c);
    }
    features::save_matrix(out_path(std::string("selection/") + name + ".csv"), m.select_columns(keep));
  }
  io::OrderedJson j;
  j["folds"] = folds;
  j["threshold"] = report.threshold;
  j["candidates"] = cand.size();
  j["selected"] = report.selected_columns().size();
  j["ga_seed"] = ga.seed;
  return j;
}

io::OrderedJson Runner::do_train_tree() {
  const auto s = config_.section("tree");
  const std::string dir = s.value("input", "selected") == "selected" ? "selection" : "features";
  const std::string variant = s.value("variant", "standard");
  models::TreeParams params;
  if (variant == "standard") params = models::TreeParams::standard();
  else if (variant == "bong_only") params = models::TreeParams::bong_only();
  else if (variant == "nllf_bong") params = models::TreeParams::nllf_bong();
  else throw ConfigError("unknown tree variant '" + variant + "'");
  params.max_depth = s.value("max_depth", params.max_depth);
  params.min_impurity_decrease = s.value("min_impurity_decrease", params.min_impurity_decrease);
  params.seed = s.value("seed", config_.seed());
  params.validate();

  const auto l = load_partition(*this);
  auto train = features::load_matrix(out_path(dir + "/train.csv"));
  auto test = features::load_matrix(out_path(dir + "/test.csv"));
  if (s.contains("families")) {
    const auto fam = families_of(s, "families", {});
    train = filter_families(train, fam);
    test = filter_families(test, fam);
  }
  const auto tree = models::train_tree(train, golds_of(l.part.train), params);
  if (tree.depth() > params.max_depth) throw InternalError("tree exceeds its depth bound");
  write_file(out_path("models/tree.json"), models::tree_to_json(tree).dump(2) + "\n");
  write_file(out_path("models/tree.dot"), models::tree_to_dot(tree));
  for (std::size_t c = 0; c < test.cols(); ++c) {
    if (test.descriptors[c].id != tree.features[c].id) throw InternalError("test columns differ from training");
  }
  const auto pred = models::predict_all(tree, test.values);
  write_predictions(out_path("predictions/tree.jsonl"), l.part.test, pred);
  io::OrderedJson j;
  j["variant"] = variant;
  j["params"] = params.to_json();
  j["columns"] = train.cols();
  j["depth"] = tree.depth();
  j["leaves"] = tree.leaves();
  return j;
}

io::OrderedJson Runner::do_train_encoder() {
  const auto s = config_.section("encoder");
  const bool augmented = s.value("variant", "augmented") == "augmented";
  auto hyper = models::EncoderHyper::from_json(s, augmented ? models::EncoderHyper::augmented()
                                                            : models::EncoderHyper::vanilla());
  if (!s.contains("seed")) hyper.seed = config_.seed();
  if (!s.contains("selection")) {
    hyper.selection = config_.task().metric_mode == MetricMode::positive_class ? nn::Selection::best_loss
                                                                              : nn::Selection::best_accuracy;
  }
  const auto l = load_partition(*this);
  auto empty_for = [](const Corpus& c) {
    features::FeatureMatrix m;
    for (const auto& e : c) m.row_ids.push_back(e.id);
    m.values.resize(static_cast<Eigen::Index>(c.size()), 0);
    return m;
  };
  features::FeatureMatrix tr = empty_for(l.part.train), va = empty_for(l.part.val), te = empty_for(l.part.test);
  if (augmented) {
    const std::string dir = s.value("input", "selected") == "selected" ? "selection" : "features";
    const auto fam = families_of(s, "families", {"nllf", "ef"});
    tr = filter_families(features::load_matrix(out_path(dir + "/train.csv")), fam);
    va = filter_families(features::load_matrix(out_path(dir + "/val.csv")), fam);
    te = filter_families(features::load_matrix(out_path(dir + "/test.csv")), fam);
  }
  const auto res = models::train_encoder(l.part.train, tr, l.part.val, va, hyper);
  const std::string dir = out_path("models/encoder");
  fs::remove_all(dir);
  fs::create_directories(dir);
  models::save_encoder(res.model, dir);
  write_predictions(out_path("predictions/encoder.jsonl"), l.part.test, models::predict_encoder_all(res.model, l.part.test, te));
  io::OrderedJson j;
  j["variant"] = augmented ? "augmented" : "vanilla";
  j["hyperparameters"] = hyper.to_json();
  j["extra_features"] = res.model.extra_width();
  j["parameters"] = res.model.parameter_count();
  j["selected_epoch"] = res.report.selected_epoch;
  return j;
}

io::OrderedJson Runner::do_baseline(const std::string& strategy) {
  const auto s = config_.section("baselines");
  const std::string key = strategy == "self-ask" ? "self_ask" : strategy;
  const auto cfg = models::PromptBaselineConfig::from_json(
      io::Json::parse(read_file(config_.resolve(s["prompts"][key].get<std::string>()))));
  const auto l = load_partition(*this);
  models::check_exemplars(cfg, l.part.train);
  Corpus targets = l.part.test;
  if (s.contains("limit")) targets.resize(std::min<std::size_t>(targets.size(), s["limit"].get<std::size_t>()));
  const auto fallback = models::majority_label(l.part.train);
  const auto verdicts = models::prompt_classify(targets, l.part.train, cfg, gateway(), completion_params(), fallback);
  models::save_transcripts(out_path("baselines/" + strategy + ".transcripts.jsonl"), verdicts, cfg);
  std::vector<Label> pred;
  std::vector<char> abst;
  std::size_t abstentions = 0;
  for (const auto& v : verdicts) {
    pred.push_back(v.label);
    abst.push_back(v.abstained ? 1 : 0);
    abstentions += v.abstained;
  }
  write_predictions(out_path("predictions/baseline-" + strategy + ".jsonl"), targets, pred, abst);
  io::OrderedJson j;
  j["strategy"] = strategy;
  j["shots"] = cfg.shots;
  j["examples"] = targets.size();
  j["abstentions"] = abstentions;
  j["fallback"] = to_string(fallback);
  return j;
}

io::OrderedJson Runner::do_evaluate() {
  const auto task = config_.task();
  const auto names = config_.section("evaluate").value("models", std::vector<std::string>{"tree"});
  io::OrderedJson report;
  report["task"] = task.name;
  report["metric_mode"] = to_string(task.metric_mode);
  report["models"] = io::OrderedJson::object();
  std::string md = "# Evaluation: " + task.name + "\n\n" + eval::table_header({task.name});
  std::string details;
  io::OrderedJson headline = io::OrderedJson::object();
  for (const auto& name : names) {
    std::vector<Label> pred;
    std::vector<Label> gold;
    std::size_t abstentions = 0;
    io::for_each_jsonl(out_path("predictions/" + name + ".jsonl"), [&](const io::OrderedJson& j, std::size_t line) {
      if (!j.contains("gold")) throw ValidationError("prediction line " + std::to_string(line) + " has no gold label");
      pred.push_back(label_from_string(j.at("prediction").get<std::string>()));
      gold.push_back(label_from_string(j.at("gold").get<std::string>()));
      abstentions += j.value("abstained", false);
    });
    auto r = eval::score(pred, gold, task.metric_mode);
    r.abstentions = abstentions;
    report["models"][name] = eval::report_to_json(r);
    headline[name] = r.headline;
    md += eval::table_row(name, "", {r});
    details += "\n" + eval::report_to_markdown(r, name);
  }
  md += details;
  write_file(out_path("reports/eval.json"), report.dump(2) + "\n");
  write_file(out_path("reports/eval.md"), md);
  io::OrderedJson j;
  j["headline"] = headline;
  return j;
}

io::OrderedJson Runner::do_explain() {
  const std::string dir = config_.section("tree").value("input", "selected") == "selected" ? "selection" : "features";
  const std::size_t limit = config_.section("explain").value("limit", std::size_t{25});
  const auto l = load_partition(*this);
  const auto tree = models::tree_from_json(io::Json::parse(read_file(out_path("models/tree.json"))));
  const auto test = features::load_matrix(out_path(dir + "/test.csv"));
  std::vector<std::size_t> cols;
  for (const auto& d : tree.features) {
    const auto c = test.column_of(d.id);
    if (!c) throw InputError("test matrix lacks tree feature '" + d.id + "'");
    cols.push_back(*c);
  }
  const auto x = test.select_columns(cols);
  const std::string out = out_path("explanations");
  fs::remove_all(out);
  fs::create_directories(out);
  std::string index = "# Decision-path explanations\n\n| Example | Prediction | Gold | Tests |\n|---|---|---|---|\n";
  std::size_t written = 0;
  for (std::size_t i = 0; i < l.part.test.size() && written < limit; ++i, ++written) {
    const auto& ex = l.part.test[i];
    const Eigen::RowVectorXd row = x.values.row(static_cast<Eigen::Index>(i));
    const auto path = models::predict_with_path(tree, row);
    if (!eval::path_is_faithful(tree, path, row)) throw InternalError("decision path for '" + ex.id + "' does not replay");
    write_file(out + "/" + safe_name(ex.id) + ".md", eval::render_explanation(tree, ex, path));
    index += "| [" + ex.id + "](" + safe_name(ex.id) + ".md) | " + to_string(path.prediction) + " | " +
             (ex.gold ? to_string(*ex.gold) : std::string("?")) + " | " + std::to_string(path.steps.size()) + " |\n";
  }
  write_file(out + "/index.md", index);
  write_file(out + "/tree.dot", models::tree_to_dot(tree));
  io::OrderedJson j;
  j["documents"] = written;
  return j;
}

io::OrderedJson Runner::do_audit() {
  const auto s = config_.section("audit");
  std::optional<double> weak_acc;
  if (s.contains("weak_val_accuracy")) {
    weak_acc = s["weak_val_accuracy"].get<double>();
  } else if (path_present(out_path("nllfg/manifest.json"))) {
    const auto m = io::Json::parse(read_file(out_path("nllfg/manifest.json")));
    if (m.contains("val_accuracy")) weak_acc = m["val_accuracy"].get<double>();
  }
  const auto items = eval::load_audit(config_.resolve(s["verdicts"].get<std::string>()));
  const auto res = eval::audit_nllfg(items, weak_acc);
  write_file(out_path("reports/audit.json"), eval::audit_to_json(res).dump(2) + "\n");
  write_file(out_path("reports/audit.md"), eval::audit_to_markdown(res));
  io::OrderedJson j;
  j["items"] = res.items;
  j["excluded"] = res.excluded;
  j["nllfg_accuracy"] = res.nllfg.accuracy;
  j["llm_accuracy"] = res.llm.accuracy;
  if (res.compounded) j["compounded"] = *res.compounded;
  return j;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const StalenessError*>(&e)) return 4;
  if (dynamic_cast<const TransportError*>(&e)) return 3;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const ParseError*>(&e) || dynamic_cast<const TemplateError*>(&e) ||
      dynamic_cast<const InputError*>(&e)) {
    return 2;
  }
  return 1;
}

}  // namespace nllf::pipeline
