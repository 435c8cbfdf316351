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

#include "nllf/classifier.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

namespace nllf::nn {

EncoderConfig backbone_preset(const std::string& backbone_id) {
  EncoderConfig c;
  if (backbone_id == "tiny") {
    c.dim = 32, c.heads = 2, c.layers = 2, c.ff_dim = 64;
  } else if (backbone_id == "small") {
    c.dim = 64, c.heads = 4, c.layers = 2, c.ff_dim = 128;
  } else if (backbone_id == "base") {
    c.dim = 128, c.heads = 4, c.layers = 4, c.ff_dim = 256;
  } else {
    throw ConfigError("unknown backbone '" + backbone_id +
                      "' (expected tiny, small or base)");
  }
  return c;
}

std::string to_string(Selection s) {
  switch (s) {
    case Selection::best_loss: return "best-loss";
    case Selection::best_accuracy: return "best-accuracy";
    case Selection::last: return "last";
  }
  return "last";
}

Selection selection_from_string(std::string_view text) {
  if (text == "best-loss") return Selection::best_loss;
  if (text == "best-accuracy") return Selection::best_accuracy;
  if (text == "last") return Selection::last;
  throw ConfigError("unknown model selection '" + std::string(text) + "'");
}

Adam::Adam(const EncoderWeights<double>& shape, const TrainHyper& hyper)
    : m_(shape.zeros_like()), v_(shape.zeros_like()), hyper_(hyper) {}

void Adam::step(EncoderWeights<double>& weights, EncoderWeights<double>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  auto w = weights.tensors();
  auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto& gi = *g[i].second;
    auto& mi = *m[i].second;
    auto& vi = *v[i].second;
    mi = hyper_.beta1 * mi + (1.0 - hyper_.beta1) * gi;
    vi = hyper_.beta2 * vi + (1.0 - hyper_.beta2) * gi.cwiseAbs2();
    w[i].second->array() -= hyper_.learning_rate * (mi.array() / c1) /
                            ((vi.array() / c2).sqrt() + hyper_.epsilon);
  }
}

Eigen::RowVectorXd SequenceClassifier::probabilities(
    const EncodedInput& input, const Eigen::RowVectorXd& extra) const {
  ForwardTrace<double> trace;
  const RowVec<double> e = extra.size() ? RowVec<double>(extra) : RowVec<double>(0);
  return softmax<double>(forward(weights, config, input, e, trace));
}

namespace {

constexpr char kMagic[8] = {'N', 'L', 'L', 'F', 'W', 'T', '0', '1'};

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("weights file is truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

io::OrderedJson config_json(const SequenceClassifier& m) {
  io::OrderedJson j;
  j["format"] = "nllf-sequence-classifier";
  j["version"] = 1;
  j["backbone_id"] = m.backbone_id;
  j["vocab"] = m.config.vocab;
  j["buckets"] = m.config.buckets;
  j["max_positions"] = m.config.max_positions;
  j["dim"] = m.config.dim;
  j["heads"] = m.config.heads;
  j["layers"] = m.config.layers;
  j["ff_dim"] = m.config.ff_dim;
  j["extra_features"] = m.config.extra_features;
  j["outputs"] = m.config.outputs;
  return j;
}

}  // namespace

void SequenceClassifier::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::string blob(kMagic, sizeof(kMagic));
  auto mutable_weights = weights;
  const auto tensors = mutable_weights.tensors();
  put<std::uint32_t>(blob, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put<std::uint32_t>(blob, static_cast<std::uint32_t>(name.size()));
    blob += name;
    put<std::int64_t>(blob, m->rows());
    put<std::int64_t>(blob, m->cols());
    blob.append(reinterpret_cast<const char*>(m->data()),
                static_cast<std::size_t>(m->size()) * sizeof(double));
  }
  write_file(dir + "/weights.bin", blob);
  write_file(dir + "/vocab.txt", tokenizer.serialize());
  write_file(dir + "/config.json", config_json(*this).dump(2) + "\n");
}

SequenceClassifier SequenceClassifier::load(const std::string& dir) {
  SequenceClassifier m;
  const auto j = io::Json::parse(read_file(dir + "/config.json"));
  if (j.value("format", "") != "nllf-sequence-classifier") {
    throw ParseError(dir + "/config.json is not a sequence classifier config");
  }
  m.backbone_id = j.at("backbone_id").get<std::string>();
  m.config.vocab = j.at("vocab");
  m.config.buckets = j.at("buckets");
  m.config.max_positions = j.at("max_positions");
  m.config.dim = j.at("dim");
  m.config.heads = j.at("heads");
  m.config.layers = j.at("layers");
  m.config.ff_dim = j.at("ff_dim");
  m.config.extra_features = j.at("extra_features");
  m.config.outputs = j.at("outputs");
  m.tokenizer = Tokenizer::deserialize(read_file(dir + "/vocab.txt"));

  Rng rng(0);
  m.weights = init_weights<double>(m.config, rng);
  const std::string blob = read_file(dir + "/weights.bin");
  if (blob.size() < sizeof(kMagic) || blob.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(dir + "/weights.bin has no weights header");
  }
  std::size_t pos = sizeof(kMagic);
  auto tensors = m.weights.tensors();
  const auto count = take<std::uint32_t>(blob, pos);
  if (count != tensors.size()) throw ParseError("weights file tensor count mismatch");
  for (auto& [name, t] : tensors) {
    const auto len = take<std::uint32_t>(blob, pos);
    if (pos + len > blob.size()) throw ParseError("weights file is truncated");
    const std::string stored = blob.substr(pos, len);
    pos += len;
    const auto rows = take<std::int64_t>(blob, pos);
    const auto cols = take<std::int64_t>(blob, pos);
    if (stored != name || rows != t->rows() || cols != t->cols()) {
      throw ParseError("weights tensor '" + stored + "' does not match '" + name + "'");
    }
    const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (pos + bytes > blob.size()) throw ParseError("weights file is truncated");
    std::memcpy(t->data(), blob.data() + pos, bytes);
    pos += bytes;
  }
  return m;
}

double item_loss(const SequenceClassifier& model, const TrainingItem& item,
                 const std::vector<double>& class_weights) {
  const auto p = model.probabilities(item.input, item.extra);
  const double wt = class_weights.empty() ? 1.0 : class_weights[item.label];
  return -wt * std::log(std::max(p(item.label), 1e-300));
}

std::vector<double> balanced_class_weights(const std::vector<TrainingItem>& items,
                                           int classes) {
  std::vector<double> counts(classes, 0.0);
  for (const auto& it : items) counts[it.label] += 1.0;
  std::vector<double> w(classes, 1.0);
  for (int c = 0; c < classes; ++c) {
    if (counts[c] > 0) w[c] = static_cast<double>(items.size()) / (classes * counts[c]);
  }
  return w;
}

TrainReport train(SequenceClassifier& model, const std::vector<TrainingItem>& train_set,
                  const std::vector<TrainingItem>& val_set, const TrainHyper& hyper) {
  if (train_set.empty()) throw InputError("training set is empty");
  if (hyper.epochs < 1 || hyper.batch_size < 1 || !(hyper.learning_rate > 0)) {
    throw ConfigError("epochs, batch_size and learning_rate must be positive");
  }
  const int k = model.config.outputs;
  for (const auto& it : train_set) {
    if (it.label < 0 || it.label >= k) throw InputError("label out of range");
  }
  const std::vector<double> weights =
      hyper.class_weighting ? balanced_class_weights(train_set, k) : std::vector<double>{};

  Adam adam(model.weights, hyper);
  auto grads = model.weights.zeros_like();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(hyper.seed);

  TrainReport report;
  EncoderWeights<double> best = model.weights;
  double best_score = 0.0;
  bool have_best = false;

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      grads.set_zero();
      for (std::size_t b = start; b < end; ++b) {
        const auto& item = train_set[order[b]];
        ForwardTrace<double> trace;
        const RowVec<double> extra =
            item.extra.size() ? RowVec<double>(item.extra) : RowVec<double>(0);
        const auto logits = forward(model.weights, model.config, item.input, extra, trace);
        const auto p = softmax<double>(logits);
        const double wt = weights.empty() ? 1.0 : weights[item.label];
        const double loss = -wt * std::log(std::max(p(item.label), 1e-300));
        if (!std::isfinite(loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                              ", item " + std::to_string(order[b]) +
                              "; lower the learning rate");
        }
        total += loss;
        RowVec<double> d = p;
        d(item.label) -= 1.0;
        backward<double>(model.weights, model.config, item.input, trace, d * (wt * inv), grads);
      }
      adam.step(model.weights, grads);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = total / static_cast<double>(train_set.size());
    if (!std::isfinite(m.train_loss)) {
      throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    if (!val_set.empty()) {
      std::size_t correct = 0;
      for (const auto& item : val_set) {
        const auto p = model.probabilities(item.input, item.extra);
        Eigen::Index arg = 0;
        p.maxCoeff(&arg);
        if (arg == item.label) ++correct;
        m.val_loss -= std::log(std::max(p(item.label), 1e-300));
      }
      m.val_loss /= static_cast<double>(val_set.size());
      m.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_set.size());
    }
    report.epochs.push_back(m);

    bool better = !have_best;
    if (val_set.empty() || hyper.selection == Selection::last) {
      better = true;
    } else if (hyper.selection == Selection::best_loss) {
      better = better || m.val_loss < best_score;
      if (better) best_score = m.val_loss;
    } else {
      better = better || m.val_accuracy > best_score;
      if (better) best_score = m.val_accuracy;
    }
    if (better) {
      best = model.weights;
      report.selected_epoch = epoch;
      have_best = true;
    }
  }
  model.weights = std::move(best);
  return report;
}

io::OrderedJson report_to_json(const TrainReport& report) {
  io::OrderedJson j;
  j["selected_epoch"] = report.selected_epoch;
  j["epochs"] = io::OrderedJson::array();
  for (const auto& e : report.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_loss", e.val_loss},
                           {"val_accuracy", e.val_accuracy}});
  }
  return j;
}

}  // namespace nllf::nn
