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

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nllf/common.hpp"

namespace nllf {

/// One classification record: ordered named text fields plus an optional
/// gold label (absent for inference-only records).
struct Example {
  std::string id;
  std::vector<std::pair<std::string, std::string>> fields;
  std::optional<Label> gold;

  /// Text of a named field; throws InputError when absent.
  const std::string& field(const std::string& name) const;
  bool has_field(const std::string& name) const;

  /// NLI premise: "name: text ¶ name: text" over all fields in order. A
  /// single-field example yields its bare text.
  std::string premise() const;

  friend bool operator==(const Example&, const Example&) = default;
};

using Corpus = std::vector<Example>;

enum class SplitMode { random, fixed_test };

struct SplitSpec {
  double train_frac = 0.7;
  double val_frac = 0.1;
  double test_frac = 0.2;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::random;
  // Only read in fixed_test mode: the pre-identified test ids.
  std::vector<std::string> fixed_test_ids;

  void validate() const;
};

struct Partition {
  Corpus train;
  Corpus val;
  Corpus test;
};

enum class MetricMode { positive_class, macro };

std::string to_string(MetricMode mode);
MetricMode metric_mode_from_string(std::string_view text);

/// Task-level parameters shared by every stage.
struct TaskConfig {
  std::string name;
  double p_q = 0.013;
  double p_l = 0.10;
  std::size_t curated_count = 0;    // C
  std::size_t augmented_count = 0;  // C+
  MetricMode metric_mode = MetricMode::macro;
  std::string positive_alias = "positive";
  std::string negative_alias = "negative";

  void validate() const;
  const std::string& alias(Label label) const {
    return label == Label::positive ? positive_alias : negative_alias;
  }

  // Published presets for the two reference tasks.
  static TaskConfig abstract_screening();
  static TaskConfig incoherence_detection();
};

/// Reads a JSON-Lines corpus. Every record must carry all `schema` fields;
/// an empty schema accepts whatever fields are present.
Corpus load_corpus(const std::string& path,
                   const std::vector<std::string>& schema = {});
void save_corpus(const std::string& path, const Corpus& corpus);
std::string corpus_to_jsonl(const Corpus& corpus);

/// Deterministic train/val/test partition. Val and test take
/// floor(frac * N) rows; the remainder goes to train. Each partition keeps
/// the corpus order.
Partition split(const Corpus& corpus, const SplitSpec& spec);

/// Sample without replacement, size max(1, round(frac * |pool|)), returned
/// in the sampled (shuffled) order.
Corpus sample_fraction(const Corpus& pool, double frac, std::uint64_t seed);

void save_split_manifest(const std::string& path, const Partition& partition,
                         const SplitSpec& spec);
/// Rebuilds a partition from a manifest and the corpus it was made from.
Partition load_split_manifest(const std::string& path, const Corpus& corpus,
                              SplitSpec* spec_out = nullptr);

}  // namespace nllf
