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

#include "nllf/synthetic.hpp"

#include <cstdio>
#include <filesystem>

namespace nllf::synthetic {

namespace {

const std::vector<std::string> kFiller = {
    "the",      "a",        "study",    "report",   "field",    "results",
    "show",     "that",     "we",       "observed", "during",   "season",
    "across",   "several",  "farms",    "in",       "region",   "with",
    "data",     "from",     "local",    "growers",  "and",      "their",
    "plots",    "over",     "three",    "years",    "yield",    "was",
    "measured", "carefully", "under",   "typical",  "weather",  "while",
    "some",     "sites",    "recorded", "lower",    "values",   "than",
    "expected", "our",      "analysis", "suggests", "strong",   "effects",
    "on",       "crop",     "growth",   "for",      "most",     "cases",
    "this",     "paper",    "describes", "methods", "used",     "by",
    "teams",    "working",  "at",       "stations", "near",     "rivers",
    "valleys",  "hills",    "annual",   "survey",   "of",       "small",
    "large",    "holdings", "is",       "reported", "together", "other",
    "factors",  "such",     "as",       "labour",   "prices",   "market",
    "access",   "credit",   "training", "programs", "were",     "also",
    "examined", "within",   "each",     "district", "community", "level",
    "outcomes", "vary",     "between",  "groups",   "however",  "overall",
    "trends",   "remain",   "stable",   "new",      "evidence", "supports",
    "earlier",  "findings", "about",    "practices", "adopted", "widely"};

const std::vector<std::string> kSignal = {"irrigation", "drought", "intercropping"};
const std::vector<std::string> kDistractor = {"tractor", "pesticide", "livestock",
                                              "greenhouse", "orchard"};

}  // namespace

Spec Spec::from_json(const io::Json& j) {
  Spec s;
  s.examples = j.value("examples", s.examples);
  s.seed = j.value("seed", s.seed);
  s.keyword_rate = j.value("keyword_rate", s.keyword_rate);
  s.min_words = j.value("min_words", s.min_words);
  s.max_words = j.value("max_words", s.max_words);
  s.answer_noise = j.value("answer_noise", s.answer_noise);
  if (s.min_words < 1 || s.max_words < s.min_words) {
    throw ConfigError("synthetic word range must satisfy 1 <= min_words <= max_words");
  }
  return s;
}

const std::vector<std::string>& signal_keywords() { return kSignal; }
const std::vector<std::string>& distractor_keywords() { return kDistractor; }

std::string question_for(const std::string& keyword, std::size_t variant) {
  switch (variant % 3) {
    case 0: return "Does the text mention " + keyword + "?";
    case 1: return "Is there any reference to " + keyword + " in the text?";
    default: return "Does the author talk about " + keyword + "?";
  }
}

std::string paraphrase_for(const std::string& keyword) {
  return "Is " + keyword + " discussed anywhere in this passage?";
}

bool planted_rule(bool k0, bool k1, bool k2) { return (k0 && k1) || k2; }

bool mentions(const std::string& text, const std::string& keyword) {
  for (const auto& w : word_tokens(text)) {
    if (w == keyword) return true;
  }
  return false;
}

Corpus generate_corpus(const Spec& spec) {
  Rng rng(spec.seed);
  std::vector<std::string> keywords = kSignal;
  keywords.insert(keywords.end(), kDistractor.begin(), kDistractor.end());
  Corpus out;
  out.reserve(spec.examples);
  for (std::size_t i = 0; i < spec.examples; ++i) {
    const std::size_t len =
        spec.min_words + uniform_index(rng, spec.max_words - spec.min_words + 1);
    std::vector<std::string> words;
    for (std::size_t w = 0; w < len; ++w) words.push_back(kFiller[uniform_index(rng, kFiller.size())]);
    std::vector<bool> present;
    for (const auto& k : keywords) {
      const bool on = uniform_unit(rng) < spec.keyword_rate;
      present.push_back(on);
      if (on) {
        const auto pos = uniform_index(rng, words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), k);
      }
    }
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%05zu", i + 1);
    Example e;
    e.id = id;
    e.fields = {{"text", join(words, " ")}};
    e.gold = planted_rule(present[0], present[1], present[2]) ? Label::positive
                                                             : Label::negative;
    out.push_back(std::move(e));
  }
  return out;
}

io::Json mock_backend(const Spec& spec) {
  std::vector<std::string> keywords = kSignal;
  keywords.insert(keywords.end(), kDistractor.begin(), kDistractor.end());
  std::string listing;
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    listing += std::to_string(i + 1) + ". " + question_for(keywords[i], i) + "\n";
  }
  io::Json pairs = io::Json::array();
  for (const auto& k : keywords) pairs.push_back({{"question", k}, {"text", {k}}});
  io::Json rules = io::Json::array();
  rules.push_back({{"when_contains", {"binary questions"}}, {"reply", listing}});
  rules.push_back({{"keyword_qa",
                    {{"text_marker", "text:"},
                     {"question_marker", "question:"},
                     {"end_marker", "\n"},
                     {"pairs", pairs},
                     {"yes", "Yes."},
                     {"no", "No."},
                     {"noise", spec.answer_noise}}}});
  return io::Json{{"rules", rules}, {"default", "I cannot tell."}};
}

bsq::BsqSet paraphrase_questions() {
  std::vector<std::string> keywords = kSignal;
  keywords.insert(keywords.end(), kDistractor.begin(), kDistractor.end());
  bsq::BsqSet out;
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    bsq::Bsq q;
    char id[32];
    std::snprintf(id, sizeof id, "para-%02zu", i + 1);
    q.id = id;
    q.text = paraphrase_for(keywords[i]);
    q.origin = bsq::Origin::paraphrase;
    out.push_back(std::move(q));
  }
  return out;
}

io::Json pipeline_config(const Spec& spec) {
  io::Json c;
  c["seed"] = spec.seed;
  c["task"] = {{"name", "synthetic"},
               {"p_q", 0.013},
               {"p_l", 0.10},
               {"curated_count", 8},
               {"augmented_count", 16},
               {"metric_mode", "macro"},
               {"positive_alias", "positive"},
               {"negative_alias", "negative"}};
  c["corpus"] = {{"path", "corpus.jsonl"}};
  c["split"] = {{"train_frac", 0.7}, {"val_frac", 0.1}, {"test_frac", 0.2}};
  c["llm"] = {{"backend", "mock"},
              {"model_id", "mock"},
              {"cache_dir", "llm_cache"},
              {"max_attempts", 3},
              {"base_delay_ms", 1},
              {"mock", mock_backend(spec)}};
  c["bsq"] = {{"template", "templates/bsq_generation.json"},
              {"per_sample", 8},
              {"augment", {{"paraphrases", "paraphrases.jsonl"}}}};
  c["weak_label"] = {{"mode", "direct"}, {"template", "templates/weak_label_direct.json"}};
  c["nllfg"] = {{"backbone_id", "small"}, {"epochs", 8}, {"batch_size", 16}, {"learning_rate", 3e-4}};
  c["features"] = {{"families", {"nllf"}}};
  c["selection"] = {{"folds", 15}, {"families", {"nllf"}}};
  c["tree"] = {{"variant", "standard"}};
  c["evaluate"] = {{"models", {"tree"}}};
  c["explain"] = {{"limit", 10}};
  return c;
}

void write_workspace(const std::string& dir, const Spec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "templates");
  save_corpus((fs::path(dir) / "corpus.jsonl").string(), generate_corpus(spec));
  bsq::save_bsqs((fs::path(dir) / "paraphrases.jsonl").string(), paraphrase_questions());
  const io::Json generation = {
      {"name", "bsq_generation"},
      {"placeholders", {"text"}},
      {"messages",
       {{{"role", "system"}, {"text", "You help domain experts break a classification task into simple checks."}},
        {{"role", "user"},
         {"text",
          "Read the text below and write binary questions (answerable with Yes or No) whose answers would "
          "help decide its label. Write one question per line.\n\nText: {text}"}}}}};
  const io::Json direct = {
      {"name", "weak_label_direct"},
      {"placeholders", {"text", "question"}},
      {"messages",
       {{{"role", "system"}, {"text", "You answer questions about a text with a single word: Yes or No."}},
        {{"role", "user"}, {"text", "Text: {text}\nQuestion: {question}\nAnswer with Yes or No."}}}}};
  write_file((fs::path(dir) / "templates" / "bsq_generation.json").string(), generation.dump(2) + "\n");
  write_file((fs::path(dir) / "templates" / "weak_label_direct.json").string(), direct.dump(2) + "\n");
  write_file((fs::path(dir) / "config.json").string(), pipeline_config(spec).dump(2) + "\n");
}

}  // namespace nllf::synthetic
