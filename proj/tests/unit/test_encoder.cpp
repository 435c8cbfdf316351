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

#include <doctest.h>

#include "nllf/classifier.hpp"
#include "nllf/encoder.hpp"

using namespace nllf;
using namespace nllf::nn;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.vocab = 12;
  c.buckets = 7;
  c.max_positions = 16;
  c.dim = 8;
  c.heads = 2;
  c.layers = 2;
  c.ff_dim = 12;
  c.extra_features = 3;
  return c;
}

EncodedInput toy_input() {
  EncodedInput in;
  in.words = {2, 5, 7, 3, 9, 5, 3};
  in.subwords = {{}, {1, 4}, {0}, {}, {2, 6, 3}, {1, 4}, {}};
  in.segments = {0, 0, 0, 0, 1, 1, 1};
  in.matches = {0, 1, 0, 0, 0, 1, 0};
  return in;
}

double loss_of(const EncoderWeights<double>& w, const EncoderConfig& c,
               const EncodedInput& in, const RowVec<double>& extra, int label) {
  ForwardTrace<double> t;
  return -std::log(softmax<double>(forward(w, c, in, extra, t))(label));
}

}  // namespace

TEST_CASE("encoder gradients match central finite differences") {
  const auto c = tiny_config();
  Rng rng(7);
  auto w = init_weights<double>(c, rng);
  // Larger weights than the default init so every path carries signal.
  for (auto& [name, m] : w.tensors()) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += 0.3 * normal_sample(rng);
  }
  const auto in = toy_input();
  RowVec<double> extra(3);
  extra << 0.5, -1.0, 2.0;
  const int label = 1;

  ForwardTrace<double> t;
  const auto p = softmax<double>(forward(w, c, in, extra, t));
  RowVec<double> d = p;
  d(label) -= 1.0;
  auto g = w.zeros_like();
  backward<double>(w, c, in, t, d, g);

  auto wt = w.tensors();
  auto gt = g.tensors();
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t k = 0; k < wt.size(); ++k) {
    auto& m = *wt[k].second;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + h;
      const double up = loss_of(w, c, in, extra, label);
      m.data()[i] = orig - h;
      const double down = loss_of(w, c, in, extra, label);
      m.data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = gt[k].second->data()[i];
      const double err = std::abs(numeric - analytic) / std::max(1e-4, std::abs(numeric) + std::abs(analytic));
      if (err > worst) worst = err;
      INFO(wt[k].first << "[" << i << "] numeric=" << numeric << " analytic=" << analytic);
      REQUIRE(err < 1e-4);
    }
  }
  MESSAGE("worst relative gradient error " << worst);
}

TEST_CASE("classifier learns a separable toy task and round-trips to disk") {
  std::vector<std::string> texts = {"alpha beta gamma", "delta epsilon"};
  TokenizerConfig tc;
  tc.max_length = 16;
  SequenceClassifier model;
  model.backbone_id = "tiny";
  model.tokenizer = Tokenizer::fit(texts, tc);
  model.config = backbone_preset("tiny");
  model.config.vocab = model.tokenizer.vocab_size();
  model.config.buckets = model.tokenizer.hash_buckets();
  model.config.max_positions = tc.max_length;
  Rng rng(1);
  model.weights = init_weights<double>(model.config, rng);

  std::vector<TrainingItem> items;
  for (int i = 0; i < 16; ++i) {
    TrainingItem it;
    it.label = i % 2;
    it.input = model.tokenizer.encode_single(it.label ? "alpha beta" : "delta epsilon");
    items.push_back(it);
  }
  TrainHyper hyper;
  hyper.epochs = 20;
  hyper.batch_size = 4;
  hyper.learning_rate = 3e-3;
  hyper.selection = Selection::last;
  const auto report = train(model, items, items, hyper);
  CHECK(report.epochs.back().val_accuracy == 1.0);
  CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss);

  const std::string dir = "encoder_roundtrip_model";
  model.save(dir);
  const auto loaded = SequenceClassifier::load(dir);
  const auto a = model.probabilities(items[0].input);
  const auto b = loaded.probabilities(items[0].input);
  CHECK(a(0) == b(0));
  CHECK(a(1) == b(1));
}

TEST_CASE("unknown backbone is a configuration error") {
  CHECK_THROWS_AS(backbone_preset("bert-large"), ConfigError);
}

TEST_CASE("pair encoding truncates the premise tail and rejects long hypotheses") {
  std::vector<std::string> texts = {"a b c d e f g h"};
  TokenizerConfig tc;
  tc.max_length = 8;
  const auto tok = Tokenizer::fit(texts, tc);
  bool cut = false;
  const auto in = tok.encode_pair("a b c d e f g h", "is a here", &cut);
  CHECK(cut);
  CHECK(in.size() == 8);
  CHECK(in.words[1] == tok.word_id("a"));
  CHECK(in.matches[1] == 1);
  CHECK(in.matches[2] == 0);
  CHECK_THROWS_AS(tok.encode_pair("a", "one two three four five six"), InputError);
}
