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

#include "nllf/data_model.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "nllf/io.hpp"

namespace nllf {

const std::string& Example::field(const std::string& name) const {
  for (const auto& [key, value] : fields) {
    if (key == name) return value;
  }
  throw InputError("example '" + id + "' has no field '" + name + "'");
}

bool Example::has_field(const std::string& name) const {
  for (const auto& [key, value] : fields) {
    if (key == name) return true;
  }
  return false;
}

std::string Example::premise() const {
  if (fields.size() == 1) return fields.front().second;
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += " \xC2\xB6 ";  // pilcrow
    out += fields[i].first;
    out += ": ";
    out += fields[i].second;
  }
  return out;
}

void SplitSpec::validate() const {
  const double fracs[] = {train_frac, val_frac, test_frac};
  for (double f : fracs) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw ValidationError("split fractions must lie in [0, 1]");
    }
  }
  if (train_frac <= 0.0) {
    throw ValidationError("split train fraction must be positive");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
}

std::string to_string(MetricMode mode) {
  return mode == MetricMode::positive_class ? "positive-class" : "macro";
}

MetricMode metric_mode_from_string(std::string_view text) {
  if (text == "positive-class") return MetricMode::positive_class;
  if (text == "macro") return MetricMode::macro;
  throw ConfigError("unknown metric mode '" + std::string(text) + "'");
}

void TaskConfig::validate() const {
  if (!(p_q > 0.0 && p_q <= p_l && p_l <= 1.0)) {
    throw ValidationError("task '" + name + "' needs 0 < p_q <= p_l <= 1");
  }
  if (curated_count > augmented_count) {
    throw ValidationError("task '" + name + "' has C > C+");
  }
}

TaskConfig TaskConfig::abstract_screening() {
  TaskConfig t;
  t.name = "sac";
  t.p_q = 0.013;
  t.p_l = 0.10;
  t.curated_count = 13;
  t.augmented_count = 109;
  t.metric_mode = MetricMode::macro;
  t.positive_alias = "include";
  t.negative_alias = "exclude";
  return t;
}

TaskConfig TaskConfig::incoherence_detection() {
  TaskConfig t;
  t.name = "iad";
  t.p_q = 0.0015;
  t.p_l = 0.10;
  t.curated_count = 10;
  t.augmented_count = 66;
  t.metric_mode = MetricMode::positive_class;
  t.positive_alias = "incoherent";
  t.negative_alias = "coherent";
  return t;
}

Corpus load_corpus(const std::string& path,
                   const std::vector<std::string>& schema) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  io::for_each_jsonl(path, [&](const io::OrderedJson& j, std::size_t line) {
    const std::string where = path + ":" + std::to_string(line);
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw ParseError(where + ": record needs a string 'id'");
    }
    Example ex;
    ex.id = j["id"].get<std::string>();
    if (!j.contains("fields") || !j["fields"].is_object()) {
      throw ParseError(where + ": record '" + ex.id +
                       "' needs an object 'fields'");
    }
    for (const auto& [key, value] : j["fields"].items()) {
      if (!value.is_string()) {
        throw ParseError(where + ": record '" + ex.id + "' field '" + key +
                         "' is not a string");
      }
      ex.fields.emplace_back(key, value.get<std::string>());
    }
    for (const auto& name : schema) {
      if (!ex.has_field(name)) {
        throw ParseError(where + ": record '" + ex.id +
                         "' is missing field '" + name + "'");
      }
    }
    bool any_text = false;
    for (const auto& [key, value] : ex.fields) {
      any_text = any_text || !trim(value).empty();
    }
    if (!any_text) {
      throw ParseError(where + ": record '" + ex.id +
                       "' has no non-empty text field");
    }
    if (j.contains("gold") && !j["gold"].is_null()) {
      if (!j["gold"].is_string()) {
        throw ParseError(where + ": record '" + ex.id +
                         "' has a non-string gold label");
      }
      try {
        ex.gold = label_from_string(j["gold"].get<std::string>());
      } catch (const ParseError& e) {
        throw ParseError(where + ": " + e.what());
      }
    }
    if (!seen.insert(ex.id).second) {
      throw ValidationError(where + ": duplicate id '" + ex.id + "'");
    }
    corpus.push_back(std::move(ex));
  });
  return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& ex : corpus) {
    io::OrderedJson j;
    j["id"] = ex.id;
    io::OrderedJson fields = io::OrderedJson::object();
    for (const auto& [key, value] : ex.fields) fields[key] = value;
    j["fields"] = std::move(fields);
    if (ex.gold) j["gold"] = to_string(*ex.gold);
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  write_file(path, corpus_to_jsonl(corpus));
}

namespace {

void require_gold(const Corpus& corpus) {
  for (const auto& ex : corpus) {
    if (!ex.gold) {
      throw ValidationError("example '" + ex.id +
                            "' has no gold label; cannot split");
    }
  }
}

Corpus pick(const Corpus& corpus, std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  Corpus out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(corpus[i]);
  return out;
}

}  // namespace

Partition split(const Corpus& corpus, const SplitSpec& spec) {
  spec.validate();
  require_gold(corpus);

  std::vector<std::size_t> pool;
  std::vector<std::size_t> test;
  double val_share = spec.val_frac;

  if (spec.mode == SplitMode::fixed_test) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < corpus.size(); ++i) index[corpus[i].id] = i;
    std::unordered_set<std::size_t> pinned;
    for (const auto& id : spec.fixed_test_ids) {
      auto it = index.find(id);
      if (it == index.end()) {
        throw ValidationError("fixed test id '" + id + "' not in corpus");
      }
      pinned.insert(it->second);
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      (pinned.count(i) ? test : pool).push_back(i);
    }
    // Train and val share what is left in their original proportion.
    val_share = spec.val_frac / (spec.train_frac + spec.val_frac);
  } else {
    pool.resize(corpus.size());
    std::iota(pool.begin(), pool.end(), 0);
  }

  Rng rng(spec.seed);
  shuffle(pool, rng);

  std::size_t n_test = 0;
  if (spec.mode == SplitMode::random) {
    n_test = static_cast<std::size_t>(
        std::floor(spec.test_frac * static_cast<double>(corpus.size())));
    test.assign(pool.begin(), pool.begin() + static_cast<long>(n_test));
  }
  const std::size_t n_val = static_cast<std::size_t>(
      std::floor(val_share * static_cast<double>(
                                 spec.mode == SplitMode::random
                                     ? corpus.size()
                                     : pool.size())));
  std::vector<std::size_t> val(pool.begin() + static_cast<long>(n_test),
                               pool.begin() + static_cast<long>(n_test + n_val));
  std::vector<std::size_t> train(pool.begin() + static_cast<long>(n_test + n_val),
                                 pool.end());

  return Partition{pick(corpus, std::move(train)), pick(corpus, std::move(val)),
                   pick(corpus, std::move(test))};
}

Corpus sample_fraction(const Corpus& pool, double frac, std::uint64_t seed) {
  if (!(frac > 0.0 && frac <= 1.0)) {
    throw ValidationError("sample fraction must lie in (0, 1]");
  }
  if (pool.empty()) throw ValidationError("cannot sample from an empty pool");
  const auto wanted = static_cast<std::size_t>(
      std::llround(frac * static_cast<double>(pool.size())));
  const std::size_t k = std::min(pool.size(), std::max<std::size_t>(1, wanted));

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(order, rng);

  Corpus out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(pool[order[i]]);
  return out;
}

void save_split_manifest(const std::string& path, const Partition& partition,
                         const SplitSpec& spec) {
  io::OrderedJson j;
  j["spec"] = {{"train_frac", spec.train_frac},
               {"val_frac", spec.val_frac},
               {"test_frac", spec.test_frac},
               {"seed", spec.seed},
               {"mode", spec.mode == SplitMode::random ? "random" : "fixed-test"}};
  if (spec.mode == SplitMode::fixed_test) {
    j["spec"]["fixed_test_ids"] = spec.fixed_test_ids;
  }
  auto ids = [](const Corpus& c) {
    std::vector<std::string> out;
    for (const auto& ex : c) out.push_back(ex.id);
    return out;
  };
  j["train"] = ids(partition.train);
  j["val"] = ids(partition.val);
  j["test"] = ids(partition.test);
  write_file(path, j.dump(2) + "\n");
}

Partition load_split_manifest(const std::string& path, const Corpus& corpus,
                              SplitSpec* spec_out) {
  io::OrderedJson j;
  try {
    j = io::OrderedJson::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  std::unordered_map<std::string, const Example*> index;
  for (const auto& ex : corpus) index[ex.id] = &ex;
  auto take = [&](const char* key) {
    Corpus out;
    for (const auto& id : j.at(key)) {
      auto it = index.find(id.get<std::string>());
      if (it == index.end()) {
        throw ValidationError(path + ": split id '" + id.get<std::string>() +
                              "' not in corpus");
      }
      out.push_back(*it->second);
    }
    return out;
  };
  if (spec_out) {
    const auto& s = j.at("spec");
    spec_out->train_frac = s.at("train_frac");
    spec_out->val_frac = s.at("val_frac");
    spec_out->test_frac = s.at("test_frac");
    spec_out->seed = s.at("seed");
    spec_out->mode = s.at("mode") == "random" ? SplitMode::random
                                              : SplitMode::fixed_test;
    if (s.contains("fixed_test_ids")) {
      spec_out->fixed_test_ids = s["fixed_test_ids"].get<std::vector<std::string>>();
    }
  }
  return Partition{take("train"), take("val"), take("test")};
}

}  // namespace nllf
