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

#include "nllf/nllfg.hpp"

#include <cmath>
#include <filesystem>
#include <map>

namespace nllf::nllfg {

namespace {

int class_of(weak::Answer a) { return a == weak::Answer::yes ? 0 : 1; }

nn::TrainingItem to_item(const nn::Tokenizer& tok, const NLIPair& p, bool* cut) {
  nn::TrainingItem item;
  item.input = tok.encode_pair(p.premise, p.hypothesis, cut);
  item.label = class_of(p.label);
  return item;
}

std::vector<nn::TrainingItem> to_items(const nn::Tokenizer& tok,
                                       const std::vector<NLIPair>& pairs) {
  std::vector<nn::TrainingItem> items;
  std::size_t truncated = 0;
  for (const auto& p : pairs) {
    bool cut = false;
    items.push_back(to_item(tok, p, &cut));
    if (cut) ++truncated;
  }
  if (truncated) {
    warn(std::to_string(truncated) + " training pairs truncated to " +
         std::to_string(tok.max_length()) + " tokens");
  }
  return items;
}

std::string pairs_hash(const std::vector<NLIPair>& pairs) {
  std::string blob;
  for (const auto& p : pairs) {
    blob += p.example_id + '\x1f' + p.bsq_id + '\x1f' + weak::to_string(p.label) + '\n';
  }
  return sha256_hex(blob);
}

nn::SequenceClassifier make_net(const nn::Tokenizer& tok, const Hyper& hyper) {
  nn::SequenceClassifier net;
  net.backbone_id = hyper.backbone_id;
  net.config = nn::backbone_preset(hyper.backbone_id);
  net.config.vocab = tok.vocab_size();
  net.config.buckets = tok.hash_buckets();
  net.config.max_positions = tok.max_length();
  net.tokenizer = tok;
  Rng rng(hyper.seed);
  net.weights = nn::init_weights<double>(net.config, rng);
  return net;
}

}  // namespace

PairSplit build_training_set(const std::vector<weak::WeakLabel>& labels,
                             const Corpus& examples, const bsq::BsqSet& questions,
                             std::uint64_t seed, double val_frac) {
  if (labels.empty()) throw ValidationError("no weak labels to build NLI pairs from");
  if (!(val_frac >= 0.0 && val_frac < 1.0)) {
    throw ConfigError("validation fraction must be in [0, 1)");
  }
  std::map<std::string, const Example*> by_id;
  for (const auto& e : examples) by_id[e.id] = &e;
  std::map<std::string, const bsq::Bsq*> q_by_id;
  for (const auto& q : questions) q_by_id[q.id] = &q;

  std::vector<NLIPair> all;
  all.reserve(labels.size());
  for (const auto& l : labels) {
    auto e = by_id.find(l.example_id);
    if (e == by_id.end()) throw ValidationError("weak label references unknown example '" + l.example_id + "'");
    auto q = q_by_id.find(l.bsq_id);
    if (q == q_by_id.end()) throw ValidationError("weak label references unknown question '" + l.bsq_id + "'");
    all.push_back(NLIPair{l.example_id, l.bsq_id, e->second->premise(), q->second->text, l.answer});
  }
  Rng rng(seed);
  shuffle(all, rng);
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(all.size())));
  PairSplit out;
  out.val.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  return out;
}

Hyper Hyper::from_json(const io::Json& j) {
  Hyper h;
  h.backbone_id = j.value("backbone_id", h.backbone_id);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.seed = j.value("seed", h.seed);
  if (j.contains("selection")) h.selection = nn::selection_from_string(j["selection"].get<std::string>());
  h.class_weighting = j.value("class_weighting", h.class_weighting);
  h.tokenizer.max_vocab = j.value("max_vocab", h.tokenizer.max_vocab);
  h.tokenizer.hash_buckets = j.value("hash_buckets", h.tokenizer.hash_buckets);
  h.tokenizer.max_length = j.value("max_length", h.tokenizer.max_length);
  nn::backbone_preset(h.backbone_id);
  return h;
}

io::OrderedJson Hyper::to_json() const {
  io::OrderedJson j;
  j["backbone_id"] = backbone_id;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["seed"] = seed;
  j["selection"] = nn::to_string(selection);
  j["class_weighting"] = class_weighting;
  j["max_vocab"] = tokenizer.max_vocab;
  j["hash_buckets"] = tokenizer.hash_buckets;
  j["max_length"] = tokenizer.max_length;
  return j;
}

std::string Model::hash() const {
  std::string blob = net.tokenizer.serialize();
  auto w = net.weights;
  for (auto& [name, m] : w.tensors()) {
    blob += name;
    blob.append(reinterpret_cast<const char*>(m->data()),
                static_cast<std::size_t>(m->size()) * sizeof(double));
  }
  return sha256_hex(blob);
}

TrainResult train(const PairSplit& pairs, const Hyper& hyper) {
  if (pairs.train.empty()) throw InputError("no training pairs");
  std::vector<std::string> texts;
  for (const auto& p : pairs.train) {
    texts.push_back(p.premise);
    texts.push_back(p.hypothesis);
  }
  const auto tok = nn::Tokenizer::fit(texts, hyper.tokenizer);
  TrainResult result;
  result.model.net = make_net(tok, hyper);
  nn::TrainHyper th;
  th.epochs = hyper.epochs;
  th.batch_size = hyper.batch_size;
  th.learning_rate = hyper.learning_rate;
  th.seed = hyper.seed;
  th.selection = hyper.selection;
  th.class_weighting = hyper.class_weighting;
  result.report = nn::train(result.model.net, to_items(tok, pairs.train),
                            to_items(tok, pairs.val), th);

  auto& m = result.model.manifest;
  m["backbone_id"] = hyper.backbone_id;
  m["hyperparameters"] = hyper.to_json();
  m["train_pairs"] = pairs.train.size();
  m["val_pairs"] = pairs.val.size();
  m["train_pairs_sha256"] = pairs_hash(pairs.train);
  m["val_pairs_sha256"] = pairs_hash(pairs.val);
  m["training"] = nn::report_to_json(result.report);
  return result;
}

Model untrained(const std::vector<std::string>& texts, const Hyper& hyper) {
  Model m;
  m.net = make_net(nn::Tokenizer::fit(texts, hyper.tokenizer), hyper);
  m.manifest["backbone_id"] = hyper.backbone_id;
  m.manifest["hyperparameters"] = hyper.to_json();
  m.manifest["trained"] = false;
  return m;
}

Scores scores_from_logits(double yes_logit, double no_logit) {
  return Scores{sigmoid(yes_logit), sigmoid(no_logit)};
}

std::pair<double, double> logits(const Model& model, const std::string& premise,
                                 const std::string& hypothesis) {
  bool cut = false;
  const auto in = model.net.tokenizer.encode_pair(premise, hypothesis, &cut);
  if (cut) {
    warn("premise truncated to fit " + std::to_string(model.net.tokenizer.max_length()) +
         " tokens for question '" + hypothesis + "'");
  }
  nn::ForwardTrace<double> trace;
  const auto out = nn::forward<double>(model.net.weights, model.net.config, in,
                                       nn::RowVec<double>(0), trace);
  return {out(0), out(1)};
}

Scores score(const Model& model, const std::string& premise,
             const std::string& hypothesis) {
  const auto [y, n] = logits(model, premise, hypothesis);
  return scores_from_logits(y, n);
}

double accuracy(const Model& model, const std::vector<NLIPair>& pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const auto [y, n] = logits(model, p.premise, p.hypothesis);
    const auto predicted = y > n ? weak::Answer::yes : weak::Answer::no;
    if (predicted == p.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

void save(const Model& model, const std::string& dir) {
  model.net.save(dir);
  auto manifest = model.manifest;
  manifest["model_sha256"] = model.hash();
  write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

Model load(const std::string& dir) {
  if (!std::filesystem::exists(dir + "/manifest.json")) {
    throw InputError("no NLLFG model at '" + dir + "'");
  }
  Model m;
  m.net = nn::SequenceClassifier::load(dir);
  m.manifest = io::OrderedJson::parse(read_file(dir + "/manifest.json"));
  m.manifest.erase("model_sha256");
  return m;
}

void save_pairs(const std::string& path, const std::vector<NLIPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    io::OrderedJson j;
    j["example_id"] = p.example_id;
    j["bsq_id"] = p.bsq_id;
    j["label"] = weak::to_string(p.label);
    out += j.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

}  // namespace nllf::nllfg
