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

#include <optional>
#include <string>
#include <vector>

#include "nllf/data_model.hpp"
#include "nllf/llm_gateway.hpp"

namespace nllf::bsq {

enum class Origin { llm, linguistic_rule, human, paraphrase };

std::string to_string(Origin origin);
Origin origin_from_string(std::string_view text);

/// A binary subtask question.
struct Bsq {
  std::string id;
  std::string text;
  Origin origin = Origin::llm;
  std::optional<std::string> group_id;
  bool active = true;
  // Raw questions: the example ids that produced them. Curated questions:
  // the raw ids of their group.
  std::vector<std::string> sources;

  friend bool operator==(const Bsq&, const Bsq&) = default;
};

using BsqSet = std::vector<Bsq>;

/// Throws ValidationError unless the text is non-empty and ends with '?'.
void validate_question_text(const std::string& text, const std::string& id);

/// Splits a completion into questions: one per line, list markers
/// ("1.", "2)", "-", "*") stripped, lines without a trailing '?' dropped.
std::vector<std::string> parse_questions(std::string_view completion);

/// Dedup key: trimmed, whitespace-collapsed, ASCII-lowercased text.
std::string dedup_key(std::string_view text);

/// Levenshtein distance over code points divided by the longer length.
double normalized_edit_distance(std::string_view a, std::string_view b);

struct GenerationResult {
  BsqSet raw;
  std::vector<std::string> misses;  // example ids with no parseable question
  std::size_t parsed_before_dedup = 0;
};

/// Bindings available to the template: every field by name, `text` (the
/// premise) and `id`.
llm::Bindings example_bindings(const Example& example);

GenerationResult generate_raw_bsqs(const Corpus& samples,
                                   const llm::PromptTemplate& tmpl,
                                   std::size_t per_sample, llm::Gateway& gateway,
                                   const llm::CompletionParams& params);

/// Review file: CSV with raw_id, raw_text, suggested_group, group_id,
/// reformulated_text, keep. suggested_group clusters questions whose
/// normalized edit distance is at most `near_duplicate_threshold`.
void export_for_review(const BsqSet& raw, const std::string& path,
                       double near_duplicate_threshold = 0.15);

/// Review file that keeps each raw question as its own group.
void export_identity_review(const BsqSet& raw, const std::string& path);

/// One curated question per group, in order of first appearance.
BsqSet import_curated(const std::string& path, const BsqSet& raw);

struct AugmentSources {
  BsqSet raw_pool;
  BsqSet linguistic;
  BsqSet human;
  BsqSet paraphrases;
};

/// Curated questions first, then extras in the order above; duplicates by
/// dedup_key keep the earliest entry. Every result question is active.
BsqSet augment(const BsqSet& curated, const AugmentSources& extras);

BsqSet active_only(const BsqSet& set);

BsqSet load_bsqs(const std::string& path);
void save_bsqs(const std::string& path, const BsqSet& set);
std::string bsqs_to_jsonl(const BsqSet& set);

}  // namespace nllf::bsq
