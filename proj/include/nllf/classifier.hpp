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

#include "nllf/encoder.hpp"
#include "nllf/io.hpp"
#include "nllf/tokenizer.hpp"

namespace nllf::nn {

/// Backbone presets by name: "tiny" (d=32, 2 layers), "small" (d=64,
/// 2 layers), "base" (d=128, 4 layers). Unknown names are a ConfigError.
EncoderConfig backbone_preset(const std::string& backbone_id);

struct TrainingItem {
  EncodedInput input;
  Eigen::RowVectorXd extra;
  int label = 0;
};

enum class Selection { best_loss, best_accuracy, last };

std::string to_string(Selection s);
Selection selection_from_string(std::string_view text);

struct TrainHyper {
  int epochs = 7;
  int batch_size = 16;
  double learning_rate = 8e-5;
  std::uint64_t seed = 0;
  Selection selection = Selection::best_loss;
  bool class_weighting = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;
  int selected_epoch = 0;
};

/// Adam state for one parameter set.
class Adam {
 public:
  Adam(const EncoderWeights<double>& shape, const TrainHyper& hyper);
  void step(EncoderWeights<double>& weights, EncoderWeights<double>& grads);

 private:
  EncoderWeights<double> m_, v_;
  TrainHyper hyper_;
  long t_ = 0;
};

/// Tokenizer plus encoder plus linear head.
struct SequenceClassifier {
  std::string backbone_id;
  EncoderConfig config;
  Tokenizer tokenizer;
  EncoderWeights<double> weights;

  /// Class probabilities (1 x outputs).
  Eigen::RowVectorXd probabilities(const EncodedInput& input,
                                   const Eigen::RowVectorXd& extra = {}) const;

  /// Writes weights.bin, vocab.txt and config.json into `dir`.
  void save(const std::string& dir) const;
  static SequenceClassifier load(const std::string& dir);
};

/// Cross-entropy of one item, optionally class weighted.
double item_loss(const SequenceClassifier& model, const TrainingItem& item,
                 const std::vector<double>& class_weights);

/// Mini-batch Adam training. Shuffling is seeded; the kept weights are the
/// ones from the epoch chosen by `selection` on `val` (the last epoch when
/// val is empty). Throws TrainingError on a non-finite loss.
TrainReport train(SequenceClassifier& model, const std::vector<TrainingItem>& train_set,
                  const std::vector<TrainingItem>& val_set, const TrainHyper& hyper);

/// Balanced weights n / (k * count_c); classes absent from the data get 1.
std::vector<double> balanced_class_weights(const std::vector<TrainingItem>& items,
                                           int classes);

io::OrderedJson report_to_json(const TrainReport& report);

}  // namespace nllf::nn
