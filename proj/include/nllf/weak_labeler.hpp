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

#include "nllf/bsq.hpp"
#include "nllf/data_model.hpp"
#include "nllf/llm_gateway.hpp"

namespace nllf::weak {

enum class Answer { yes, no };
enum class LabelMode { direct, cot };

std::string to_string(Answer answer);
Answer answer_from_string(std::string_view text);
std::string to_string(LabelMode mode);
LabelMode label_mode_from_string(std::string_view text);

/// Per-language answer vocabulary. Entries are single words compared
/// against ASCII-lowercased tokens.
struct Lexicon {
  std::vector<std::string> yes{"yes"};
  std::vector<std::string> no{"no"};
  // Chain-of-thought responses are searched after the last marker first.
  std::vector<std::string> answer_markers{"answer"};

  static Lexicon english();
  static Lexicon spanish();
  static Lexicon from_json(const io::Json& j);
};

/// Index of the first class in `classes` whose word appears as a
/// standalone token, scanning left to right. Shared by the weak labeler and
/// the prompting baselines.
std::optional<std::size_t> first_class_token(
    std::string_view text, const std::vector<std::vector<std::string>>& classes);

/// Trailing segment after the last occurrence of any marker, or nullopt.
std::optional<std::string> after_last_marker(
    std::string_view text, const std::vector<std::string>& markers);

/// Direct: the first standalone yes/no token decides. CoT: the segment
/// after the final answer marker is searched first, then the whole text.
std::optional<Answer> extract_answer(std::string_view raw, LabelMode mode,
                                     const Lexicon& lexicon = Lexicon::english());

struct WeakLabel {
  std::string example_id;
  std::string bsq_id;
  Answer answer = Answer::no;
  LabelMode mode = LabelMode::direct;
  std::string raw;       // empty when loaded from disk; see raw_hash
  std::string raw_hash;  // SHA-256 of raw
};

struct ExtractionFailure {
  std::string example_id;
  std::string bsq_id;
  std::string raw;
};

struct WeakLabelResult {
  std::vector<WeakLabel> labels;
  std::vector<ExtractionFailure> failures;
};

/// Labels every (example, question) pair. Template placeholders: the
/// example fields, `text`, `id`, and `question`.
WeakLabelResult weak_label(const Corpus& examples, const bsq::BsqSet& questions,
                           LabelMode mode, const llm::PromptTemplate& tmpl,
                           llm::Gateway& gateway,
                           const llm::CompletionParams& params,
                           const Lexicon& lexicon = Lexicon::english());

/// Yes/No counts per question.
struct HistogramRow {
  std::string bsq_id;
  std::string text;
  std::size_t yes = 0;
  std::size_t no = 0;
  std::size_t failed = 0;
};

std::vector<HistogramRow> label_histogram(const WeakLabelResult& result,
                                          const bsq::BsqSet& questions);
std::string histogram_csv(const std::vector<HistogramRow>& rows);
/// Horizontal text bar chart, one line per question.
std::string histogram_chart(const std::vector<HistogramRow>& rows,
                            std::size_t width = 40);

/// Throws ValidationError on a repeated (example, question, mode) triple.
void check_unique(const std::vector<WeakLabel>& labels);

void save_labels(const std::string& path, const std::vector<WeakLabel>& labels);
std::vector<WeakLabel> load_labels(const std::string& path);
void save_failures(const std::string& path,
                   const std::vector<ExtractionFailure>& failures);

}  // namespace nllf::weak
