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
#include "nllf/classifier.hpp"
#include "nllf/data_model.hpp"
#include "nllf/weak_labeler.hpp"

namespace nllf::nllfg {

/// One premise/hypothesis pair. Class 0 is yes (entailment role), class 1
/// is no (contradiction role).
struct NLIPair {
  std::string example_id;
  std::string bsq_id;
  std::string premise;
  std::string hypothesis;
  weak::Answer label = weak::Answer::no;
};

struct PairSplit {
  std::vector<NLIPair> train;
  std::vector<NLIPair> val;
};

/// Joins labels to their example premise and question text, shuffles with
/// `seed` and holds out round(val_frac * n) pairs. Throws ValidationError on
/// an empty label set or an unknown example/question id.
PairSplit build_training_set(const std::vector<weak::WeakLabel>& labels,
                             const Corpus& examples, const bsq::BsqSet& questions,
                             std::uint64_t seed = 0, double val_frac = 0.1);

struct Hyper {
  std::string backbone_id = "small";
  int epochs = 7;
  int batch_size = 16;
  double learning_rate = 8e-5;
  std::uint64_t seed = 0;
  nn::Selection selection = nn::Selection::best_loss;
  bool class_weighting = false;
  nn::TokenizerConfig tokenizer;

  static Hyper from_json(const io::Json& j);
  io::OrderedJson to_json() const;
};

struct Model {
  nn::SequenceClassifier net;
  io::OrderedJson manifest;  // backbone, hyperparameters, data hashes, metrics

  /// SHA-256 over the weights and vocabulary; keys the NLLF cache.
  std::string hash() const;
};

struct TrainResult {
  Model model;
  nn::TrainReport report;
};

/// Fits the tokenizer on the training pairs and trains one model for all
/// questions.
TrainResult train(const PairSplit& pairs, const Hyper& hyper);

/// Randomly initialized, untrained model over the given vocabulary texts.
Model untrained(const std::vector<std::string>& texts, const Hyper& hyper);

struct Scores {
  double yes = 0.5;
  double no = 0.5;
};

/// Independent sigmoid of each logit; the two values need not sum to 1.
Scores scores_from_logits(double yes_logit, double no_logit);

/// (yes_logit, no_logit). A premise that does not fit is truncated at the
/// tail with a warning.
std::pair<double, double> logits(const Model& model, const std::string& premise,
                                 const std::string& hypothesis);
Scores score(const Model& model, const std::string& premise,
             const std::string& hypothesis);

/// Argmax accuracy over pairs.
double accuracy(const Model& model, const std::vector<NLIPair>& pairs);

void save(const Model& model, const std::string& dir);
Model load(const std::string& dir);

void save_pairs(const std::string& path, const std::vector<NLIPair>& pairs);

}  // namespace nllf::nllfg
