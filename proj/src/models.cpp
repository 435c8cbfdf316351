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

#include "nllf/models.hpp"

#include <filesystem>
#include <map>

#include "nllf/bsq.hpp"
#include "nllf/weak_labeler.hpp"

namespace nllf::models {

// ---------------------------------------------------------------------------
// Encoder

EncoderHyper EncoderHyper::vanilla() { return EncoderHyper{}; }

EncoderHyper EncoderHyper::augmented() {
  EncoderHyper h;
  h.learning_rate = 5e-6;
  return h;
}

EncoderHyper EncoderHyper::from_json(const io::Json& j, const EncoderHyper& base) {
  EncoderHyper h = base;
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
  if (h.epochs < 1 || h.batch_size < 1 || !(h.learning_rate > 0)) {
    throw ConfigError("encoder epochs, batch_size and learning_rate must be positive");
  }
  nn::backbone_preset(h.backbone_id);
  return h;
}

io::OrderedJson EncoderHyper::to_json() const {
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

namespace {

void check_aligned(const Corpus& examples, const features::FeatureMatrix& extra, const char* what) {
  if (extra.rows() != examples.size()) {
    throw InputError(std::string(what) + " features have " + std::to_string(extra.rows()) +
                     " rows for " + std::to_string(examples.size()) + " examples");
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (extra.row_ids[i] != examples[i].id) {
      throw InputError(std::string(what) + " feature row " + std::to_string(i) + " is '" +
                       extra.row_ids[i] + "', expected '" + examples[i].id + "'");
    }
  }
}

Eigen::RowVectorXd standardized(const EncoderModel& m, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (static_cast<std::size_t>(row.size()) != m.extra_width()) {
    throw InputError("expected " + std::to_string(m.extra_width()) + " extra features, got " +
                     std::to_string(row.size()));
  }
  if (row.size() == 0) return {};
  return ((row - m.feature_mean).array() / m.feature_scale.array()).matrix();
}

nn::EncodedInput encode_text(const nn::Tokenizer& tok, const Example& ex) {
  bool truncated = false;
  auto in = tok.encode_single(ex.premise(), &truncated);
  if (truncated) warn("example '" + ex.id + "' truncated to the encoder's maximum length");
  return in;
}

std::vector<nn::TrainingItem> items_for(const EncoderModel& m, const Corpus& examples,
                                        const features::FeatureMatrix& extra) {
  std::vector<nn::TrainingItem> items;
  items.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (!ex.gold) throw ValidationError("example '" + ex.id + "' has no gold label");
    items.push_back(nn::TrainingItem{encode_text(m.net.tokenizer, ex),
                                     standardized(m, extra.values.row(static_cast<Eigen::Index>(i))),
                                     static_cast<int>(*ex.gold)});
  }
  return items;
}

}  // namespace

EncoderResult train_encoder(const Corpus& train, const features::FeatureMatrix& train_extra,
                            const Corpus& val, const features::FeatureMatrix& val_extra,
                            const EncoderHyper& hyper) {
  if (train.empty()) throw InputError("no training examples for the encoder");
  check_aligned(train, train_extra, "training");
  check_aligned(val, val_extra, "validation");
  if (train_extra.cols() != val_extra.cols()) throw InputError("train and validation feature widths differ");
  for (std::size_t c = 0; c < train_extra.cols(); ++c) {
    if (train_extra.descriptors[c].id != val_extra.descriptors[c].id) {
      throw InputError("train and validation feature columns differ at " + std::to_string(c));
    }
  }

  std::vector<std::string> texts;
  for (const auto& ex : train) texts.push_back(ex.premise());
  const auto tok = nn::Tokenizer::fit(texts, hyper.tokenizer);

  EncoderResult result;
  auto& m = result.model;
  const auto width = static_cast<Eigen::Index>(train_extra.cols());
  for (const auto& d : train_extra.descriptors) m.feature_ids.push_back(d.id);
  m.feature_mean = Eigen::RowVectorXd::Zero(width);
  m.feature_scale = Eigen::RowVectorXd::Ones(width);
  if (width > 0) {
    m.feature_mean = train_extra.values.colwise().mean();
    const Eigen::MatrixXd centered = train_extra.values.rowwise() - m.feature_mean;
    const double n = static_cast<double>(train_extra.rows());
    for (Eigen::Index c = 0; c < width; ++c) {
      const double sd = std::sqrt(centered.col(c).squaredNorm() / n);
      m.feature_scale(c) = sd > 0 ? sd : 1.0;
    }
  }

  m.net.backbone_id = hyper.backbone_id;
  m.net.config = nn::backbone_preset(hyper.backbone_id);
  m.net.config.vocab = tok.vocab_size();
  m.net.config.buckets = tok.hash_buckets();
  m.net.config.max_positions = tok.max_length();
  m.net.config.extra_features = static_cast<int>(width);
  m.net.tokenizer = tok;
  Rng rng(hyper.seed);
  m.net.weights = nn::init_weights<double>(m.net.config, rng);

  nn::TrainHyper th;
  th.epochs = hyper.epochs;
  th.batch_size = hyper.batch_size;
  th.learning_rate = hyper.learning_rate;
  th.seed = hyper.seed;
  th.selection = hyper.selection;
  th.class_weighting = hyper.class_weighting;
  result.report = nn::train(m.net, items_for(m, train, train_extra), items_for(m, val, val_extra), th);

  m.manifest["hyperparameters"] = hyper.to_json();
  m.manifest["extra_features"] = m.feature_ids.size();
  m.manifest["parameters"] = m.parameter_count();
  m.manifest["train_examples"] = train.size();
  m.manifest["val_examples"] = val.size();
  m.manifest["training"] = nn::report_to_json(result.report);
  return result;
}

Label predict_encoder(const EncoderModel& model, const Example& example,
                      const Eigen::Ref<const Eigen::RowVectorXd>& extra_row) {
  const auto p = model.net.probabilities(encode_text(model.net.tokenizer, example),
                                         standardized(model, extra_row));
  return p(1) > p(0) ? Label::positive : Label::negative;
}

std::vector<Label> predict_encoder_all(const EncoderModel& model, const Corpus& examples,
                                       const features::FeatureMatrix& extra) {
  check_aligned(examples, extra, "inference");
  if (extra.cols() != model.extra_width()) throw InputError("feature width differs from the trained encoder");
  for (std::size_t c = 0; c < extra.cols(); ++c) {
    if (extra.descriptors[c].id != model.feature_ids[c]) {
      throw InputError("feature column " + std::to_string(c) + " is '" + extra.descriptors[c].id +
                       "', the encoder expects '" + model.feature_ids[c] + "'");
    }
  }
  std::vector<Label> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out.push_back(predict_encoder(model, examples[i], extra.values.row(static_cast<Eigen::Index>(i))));
  }
  return out;
}

void save_encoder(const EncoderModel& model, const std::string& dir) {
  model.net.save(dir);
  io::OrderedJson j;
  j["feature_ids"] = model.feature_ids;
  j["feature_mean"] = std::vector<double>(model.feature_mean.data(), model.feature_mean.data() + model.feature_mean.size());
  j["feature_scale"] = std::vector<double>(model.feature_scale.data(), model.feature_scale.data() + model.feature_scale.size());
  j["manifest"] = model.manifest;
  write_file((std::filesystem::path(dir) / "encoder.json").string(), j.dump(2) + "\n");
}

EncoderModel load_encoder(const std::string& dir) {
  EncoderModel m;
  m.net = nn::SequenceClassifier::load(dir);
  const auto path = (std::filesystem::path(dir) / "encoder.json").string();
  io::Json j;
  try {
    j = io::Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  m.feature_ids = j.at("feature_ids").get<std::vector<std::string>>();
  const auto mean = j.at("feature_mean").get<std::vector<double>>();
  const auto scale = j.at("feature_scale").get<std::vector<double>>();
  if (mean.size() != m.feature_ids.size() || scale.size() != m.feature_ids.size() ||
      static_cast<int>(m.feature_ids.size()) != m.net.config.extra_features) {
    throw ParseError(path + ": feature metadata does not match the network");
  }
  m.feature_mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.feature_scale = Eigen::Map<const Eigen::RowVectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  if (j.contains("manifest")) m.manifest = io::OrderedJson::parse(j["manifest"].dump());
  return m;
}

// ---------------------------------------------------------------------------
// Prompting

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::vanilla: return "vanilla";
    case Strategy::cot: return "cot";
    case Strategy::self_ask: return "self-ask";
  }
  return "vanilla";
}

Strategy strategy_from_string(std::string_view text) {
  if (text == "vanilla") return Strategy::vanilla;
  if (text == "cot") return Strategy::cot;
  if (text == "self-ask" || text == "self_ask") return Strategy::self_ask;
  throw ConfigError("unknown prompting strategy '" + std::string(text) + "'");
}

void PromptBaselineConfig::validate() const {
  if (shots != 0 && shots != 4) throw ConfigError("shots must be 0 or 4, got " + std::to_string(shots));
  if (shots == 4 && exemplars.size() != 4) {
    throw ConfigError("4-shot prompting needs exactly 4 exemplars, got " + std::to_string(exemplars.size()));
  }
  if (positive_words.empty() || negative_words.empty()) {
    throw ConfigError("prompt config needs positive_words and negative_words");
  }
  if (query.messages.empty()) throw ConfigError("prompt config has no query template");
  if (shots == 4 && exemplar_answer.messages.empty()) throw ConfigError("4-shot prompting needs an exemplar_answer template");
  if (strategy == Strategy::self_ask) {
    if (follow_up_answer.messages.empty() || intermediate.messages.empty() || force_final.messages.empty()) {
      throw ConfigError("self-ask needs follow_up_answer, intermediate and force_final templates");
    }
  }
}

namespace {

llm::PromptTemplate single_turn(const io::Json& j, const std::string& key, llm::Role role) {
  if (!j.contains(key)) return {};
  const auto& v = j.at(key);
  if (v.is_object()) return llm::PromptTemplate::from_json(v);
  llm::PromptTemplate t;
  t.name = key;
  t.messages.push_back({role, v.get<std::string>()});
  // Declared placeholders are whatever `{name}` tokens the text uses.
  const std::string text = v.get<std::string>();
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      ++i;
      continue;
    }
    if (text[i] != '{') continue;
    const auto close = text.find('}', i);
    if (close == std::string::npos) break;
    const std::string name = text.substr(i + 1, close - i - 1);
    if (std::find(t.placeholders.begin(), t.placeholders.end(), name) == t.placeholders.end()) {
      t.placeholders.push_back(name);
    }
    i = close;
  }
  t.validate();
  return t;
}

llm::Bindings bindings_for(const llm::PromptTemplate& t, const llm::Bindings& all) {
  llm::Bindings out;
  for (const auto& name : t.placeholders) {
    if (auto it = all.find(name); it != all.end()) out.insert(*it);
  }
  return out;
}

void append_rendered(llm::Messages& into, const llm::PromptTemplate& t, const llm::Bindings& all) {
  for (auto& m : llm::render(t, bindings_for(t, all))) into.push_back(std::move(m));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Text of the last line that starts with the follow-up marker.
std::optional<std::string> last_follow_up(const std::string& reply, const std::string& marker) {
  std::optional<std::string> found;
  for (const auto& line : split_lines(reply)) {
    const std::string t = trim(line);
    if (lower(t).rfind(marker, 0) == 0) {
      const std::string q = trim(t.substr(marker.size()));
      if (!q.empty()) found = q;
    }
  }
  return found;
}

bool has_marker(const std::string& reply, const PromptBaselineConfig& cfg) {
  return weak::after_last_marker(reply, cfg.answer_markers).has_value();
}

std::string verdict_word(const PromptBaselineConfig& cfg, Label l) {
  return l == Label::positive ? cfg.positive_words.front() : cfg.negative_words.front();
}

}  // namespace

PromptBaselineConfig PromptBaselineConfig::from_json(const io::Json& j) {
  PromptBaselineConfig c;
  try {
    c.strategy = strategy_from_string(j.value("strategy", "vanilla"));
    c.shots = j.value("shots", 0);
    c.system = j.value("system", "");
    c.query = single_turn(j, "query", llm::Role::user);
    c.exemplar_answer = single_turn(j, "exemplar_answer", llm::Role::assistant);
    c.follow_up_answer = single_turn(j, "follow_up_answer", llm::Role::user);
    c.intermediate = single_turn(j, "intermediate", llm::Role::user);
    c.force_final = single_turn(j, "force_final", llm::Role::user);
    c.follow_up_marker = lower(j.value("follow_up_marker", c.follow_up_marker));
    c.max_follow_ups = j.value("max_follow_ups", c.max_follow_ups);
    c.positive_words = j.value("positive_words", c.positive_words);
    c.negative_words = j.value("negative_words", c.negative_words);
    c.answer_markers = j.value("answer_markers", c.answer_markers);
    for (const auto& e : j.value("exemplars", io::Json::array())) {
      Exemplar ex;
      ex.id = e.at("id").get<std::string>();
      const std::string lab = e.at("label").get<std::string>();
      if (lab == "positive") ex.label = Label::positive;
      else if (lab == "negative") ex.label = Label::negative;
      else throw ConfigError("exemplar '" + ex.id + "' label must be positive or negative");
      ex.rationale = e.value("rationale", "");
      c.exemplars.push_back(std::move(ex));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("prompt config: ") + e.what());
  }
  c.validate();
  return c;
}

void check_exemplars(const PromptBaselineConfig& config, const Corpus& train) {
  std::set<std::string> ids;
  for (const auto& e : train) ids.insert(e.id);
  for (const auto& ex : config.exemplars) {
    if (!ids.count(ex.id)) {
      throw ValidationError("exemplar '" + ex.id + "' is not in the training split");
    }
  }
}

std::optional<Label> extract_verdict(std::string_view reply, const PromptBaselineConfig& cfg) {
  const std::vector<std::vector<std::string>> classes{cfg.positive_words, cfg.negative_words};
  auto pick = [&](std::string_view s) -> std::optional<Label> {
    if (auto k = weak::first_class_token(s, classes)) return *k == 0 ? Label::positive : Label::negative;
    return std::nullopt;
  };
  if (auto tail = weak::after_last_marker(reply, cfg.answer_markers)) {
    if (auto v = pick(*tail)) return v;
  }
  return pick(reply);
}

std::vector<PromptVerdict> prompt_classify(const Corpus& examples, const Corpus& pool,
                                           const PromptBaselineConfig& cfg, llm::Gateway& gateway,
                                           const llm::CompletionParams& params, Label fallback) {
  cfg.validate();
  std::map<std::string, const Example*> by_id;
  for (const auto& e : pool) by_id[e.id] = &e;

  // Shared conversation prefix: system turn plus the exemplar exchanges.
  llm::Messages prefix;
  if (!cfg.system.empty()) prefix.push_back({llm::Role::system, cfg.system});
  if (cfg.shots == 4) {
    for (const auto& ex : cfg.exemplars) {
      auto it = by_id.find(ex.id);
      if (it == by_id.end()) throw ValidationError("exemplar '" + ex.id + "' not found in the example pool");
      auto b = bsq::example_bindings(*it->second);
      b["verdict"] = verdict_word(cfg, ex.label);
      b["rationale"] = ex.rationale;
      append_rendered(prefix, cfg.query, b);
      append_rendered(prefix, cfg.exemplar_answer, b);
    }
  }

  std::vector<PromptVerdict> out(examples.size());
  std::vector<llm::Bindings> binds(examples.size());
  std::vector<std::size_t> active;
  std::vector<std::string> final_reply(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out[i].example_id = examples[i].id;
    out[i].transcript = prefix;
    binds[i] = bsq::example_bindings(examples[i]);
    append_rendered(out[i].transcript, cfg.query, binds[i]);
    active.push_back(i);
  }

  std::vector<char> forced(examples.size(), 0);
  while (!active.empty()) {
    std::vector<llm::Messages> requests;
    for (auto i : active) requests.push_back(out[i].transcript);
    const auto replies = gateway.complete_all(requests, params);

    std::vector<std::size_t> next;
    std::vector<std::size_t> asking;
    std::vector<llm::Messages> sub_requests;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto i = active[k];
      const std::string& reply = replies[k].text;
      out[i].transcript.push_back({llm::Role::assistant, reply});
      final_reply[i] = reply;
      if (cfg.strategy != Strategy::self_ask || forced[i] || has_marker(reply, cfg)) continue;
      const auto follow = last_follow_up(reply, cfg.follow_up_marker);
      if (!follow) continue;
      if (out[i].follow_ups >= cfg.max_follow_ups) {
        append_rendered(out[i].transcript, cfg.force_final, binds[i]);
        forced[i] = 1;
        next.push_back(i);
        continue;
      }
      auto b = binds[i];
      b["follow_up"] = *follow;
      llm::Messages sub;
      if (!cfg.system.empty()) sub.push_back({llm::Role::system, cfg.system});
      append_rendered(sub, cfg.follow_up_answer, b);
      sub_requests.push_back(std::move(sub));
      asking.push_back(i);
    }
    if (!asking.empty()) {
      const auto answers = gateway.complete_all(sub_requests, params);
      for (std::size_t k = 0; k < asking.size(); ++k) {
        const auto i = asking[k];
        auto b = binds[i];
        b["follow_up"] = *last_follow_up(final_reply[i], cfg.follow_up_marker);
        b["intermediate_answer"] = trim(answers[k].text);
        append_rendered(out[i].transcript, cfg.intermediate, b);
        ++out[i].follow_ups;
        next.push_back(i);
      }
    }
    std::sort(next.begin(), next.end());
    active = std::move(next);
  }

  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (auto v = extract_verdict(final_reply[i], cfg)) {
      out[i].label = *v;
    } else {
      out[i].label = fallback;
      out[i].abstained = true;
    }
  }
  return out;
}

io::OrderedJson verdict_to_json(const PromptVerdict& v, const PromptBaselineConfig& cfg) {
  io::OrderedJson j;
  j["example_id"] = v.example_id;
  j["strategy"] = to_string(cfg.strategy);
  j["shots"] = cfg.shots;
  j["verdict"] = to_string(v.label);
  j["abstained"] = v.abstained;
  j["follow_ups"] = v.follow_ups;
  j["transcript"] = io::OrderedJson::array();
  for (const auto& m : v.transcript) {
    j["transcript"].push_back({{"role", llm::to_string(m.role)}, {"text", m.text}});
  }
  return j;
}

void save_transcripts(const std::string& path, const std::vector<PromptVerdict>& verdicts,
                      const PromptBaselineConfig& cfg) {
  std::string text;
  for (const auto& v : verdicts) text += verdict_to_json(v, cfg).dump() + "\n";
  write_file(path, text);
}

Label majority_label(const Corpus& examples) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (const auto& e : examples) {
    if (!e.gold) continue;
    (*e.gold == Label::positive ? pos : neg) += 1;
  }
  return pos > neg ? Label::positive : Label::negative;
}

}  // namespace nllf::models
