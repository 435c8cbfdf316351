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

#include "nllf/classifier.hpp"
#include "nllf/data_model.hpp"
#include "nllf/feature_bank.hpp"
#include "nllf/llm_gateway.hpp"
#include "nllf/tree.hpp"

namespace nllf::models {

// ---------------------------------------------------------------------------
// Feature-augmented encoder

struct EncoderHyper {
  std::string backbone_id = "small";
  int epochs = 8;
  int batch_size = 32;
  double learning_rate = 1e-5;
  std::uint64_t seed = 0;
  nn::Selection selection = nn::Selection::best_accuracy;
  bool class_weighting = false;
  nn::TokenizerConfig tokenizer;

  /// Plain text encoder: lr 1e-5.
  static EncoderHyper vanilla();
  /// Text plus extra features: lr 5e-6.
  static EncoderHyper augmented();

  /// Missing keys fall back to `base`.
  static EncoderHyper from_json(const io::Json& j, const EncoderHyper& base);
  io::OrderedJson to_json() const;
};

/// Class index i of the network is Label(i).
struct EncoderModel {
  nn::SequenceClassifier net;
  std::vector<std::string> feature_ids;
  // Per-column standardization fitted on the training rows.
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_scale;
  io::OrderedJson manifest;

  std::size_t extra_width() const { return feature_ids.size(); }
  std::size_t parameter_count() const { return net.weights.parameter_count(); }
};

struct EncoderResult {
  EncoderModel model;
  nn::TrainReport report;
};

/// `train_extra` / `val_extra` may have zero columns (vanilla variant) but
/// must be row-aligned with their examples. Every example needs a gold label.
EncoderResult train_encoder(const Corpus& train, const features::FeatureMatrix& train_extra,
                            const Corpus& val, const features::FeatureMatrix& val_extra,
                            const EncoderHyper& hyper);

Label predict_encoder(const EncoderModel& model, const Example& example,
                      const Eigen::Ref<const Eigen::RowVectorXd>& extra_row);
std::vector<Label> predict_encoder_all(const EncoderModel& model, const Corpus& examples,
                                       const features::FeatureMatrix& extra);

void save_encoder(const EncoderModel& model, const std::string& dir);
EncoderModel load_encoder(const std::string& dir);

// ---------------------------------------------------------------------------
// Prompting baselines

enum class Strategy { vanilla, cot, self_ask };

std::string to_string(Strategy s);
Strategy strategy_from_string(std::string_view text);

struct Exemplar {
  std::string id;
  Label label = Label::negative;
  // Worked reasoning shown for cot / self-ask exemplars; may be empty.
  std::string rationale;
};

/// Prompt pieces for one strategy. Every template may use the example
/// fields, `text` and `id`; exemplar answers also see `verdict` and
/// `rationale`; self-ask sub-prompts see `follow_up` and `intermediate_answer`.
struct PromptBaselineConfig {
  Strategy strategy = Strategy::vanilla;
  int shots = 0;
  std::vector<Exemplar> exemplars;
  std::string system;
  llm::PromptTemplate query;              // single user turn
  llm::PromptTemplate exemplar_answer;    // assistant turn after each exemplar query
  llm::PromptTemplate follow_up_answer;   // self-ask: answers one follow-up
  llm::PromptTemplate intermediate;       // self-ask: user turn carrying the answer
  llm::PromptTemplate force_final;        // self-ask: sent once the cap is hit
  std::string follow_up_marker = "follow up:";
  std::size_t max_follow_ups = 4;
  std::vector<std::string> positive_words;
  std::vector<std::string> negative_words;
  std::vector<std::string> answer_markers{"answer"};

  /// ConfigError unless shots is 0 or 4 and a 4-shot config has exactly
  /// four exemplars.
  void validate() const;
  static PromptBaselineConfig from_json(const io::Json& j);
};

/// Checks that every exemplar id belongs to the training split.
void check_exemplars(const PromptBaselineConfig& config, const Corpus& train);

struct PromptVerdict {
  std::string example_id;
  Label label = Label::negative;
  bool abstained = false;
  std::size_t follow_ups = 0;
  llm::Messages transcript;  // every turn, including the model's replies
};

/// Verdict from a reply: the text after the last answer marker is searched
/// first, then the whole reply; the earliest class word wins.
std::optional<Label> extract_verdict(std::string_view reply, const PromptBaselineConfig& config);

/// Classifies every example. Exemplar ids are resolved in `pool`.
/// Unextractable verdicts become `fallback` with abstained = true.
std::vector<PromptVerdict> prompt_classify(const Corpus& examples, const Corpus& pool,
                                           const PromptBaselineConfig& config,
                                           llm::Gateway& gateway,
                                           const llm::CompletionParams& params,
                                           Label fallback);

io::OrderedJson verdict_to_json(const PromptVerdict& verdict, const PromptBaselineConfig& config);
void save_transcripts(const std::string& path, const std::vector<PromptVerdict>& verdicts,
                      const PromptBaselineConfig& config);

/// Most frequent gold label; ties go to negative.
Label majority_label(const Corpus& examples);

}  // namespace nllf::models
