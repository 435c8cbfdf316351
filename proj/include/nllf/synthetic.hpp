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

#include <string>
#include <vector>

#include "nllf/bsq.hpp"
#include "nllf/data_model.hpp"
#include "nllf/io.hpp"

namespace nllf::synthetic {

/// Planted-rule corpus: filler text with keywords sprinkled in. The gold
/// label is positive iff (k0 and k1) or k2 over the three signal keywords;
/// the remaining keywords are distractors.
struct Spec {
  std::size_t examples = 2000;
  std::uint64_t seed = 0;
  double keyword_rate = 0.35;
  std::size_t min_words = 14;
  std::size_t max_words = 24;
  double answer_noise = 0.10;  // mock LLM flips this share of answers

  static Spec from_json(const io::Json& j);
};

const std::vector<std::string>& signal_keywords();
const std::vector<std::string>& distractor_keywords();

/// Question about one keyword; `variant` picks one of three phrasings.
std::string question_for(const std::string& keyword, std::size_t variant = 0);
/// A fourth phrasing that the generator never produces.
std::string paraphrase_for(const std::string& keyword);

/// The planted rule over keyword presence.
bool planted_rule(bool k0, bool k1, bool k2);
bool mentions(const std::string& text, const std::string& keyword);

Corpus generate_corpus(const Spec& spec);

/// Mock backend config answering generation prompts with keyword questions
/// and yes/no prompts by keyword presence, with deterministic noise.
io::Json mock_backend(const Spec& spec);

/// Keyword questions never shown to the weak labeler; used as the
/// augmentation extras (one per keyword).
bsq::BsqSet paraphrase_questions();

/// Pipeline config for a synthetic workspace: mock LLM, NLLF-only features,
/// small backbone. Paths are relative to the workspace directory.
io::Json pipeline_config(const Spec& spec);

/// Writes corpus.jsonl, paraphrases.jsonl, templates/ and config.json into
/// `dir`, creating it if needed.
void write_workspace(const std::string& dir, const Spec& spec);

}  // namespace nllf::synthetic
