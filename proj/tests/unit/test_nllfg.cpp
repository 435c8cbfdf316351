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

#include "nllf/nllfg.hpp"
#include "test_util.hpp"

using namespace nllf;

namespace {

Corpus passages(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> filler{"field", "soil", "yield", "season", "crop", "farm", "plot",
                                               "water", "trial", "harvest", "sample", "study"};
  Rng rng(seed);
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> words;
    for (int w = 0; w < 10; ++w) words.push_back(filler[uniform_index(rng, filler.size())]);
    if (uniform_unit(rng) < 0.5) words[uniform_index(rng, words.size())] = "irrigation";
    if (uniform_unit(rng) < 0.5) words[uniform_index(rng, words.size())] = "drought";
    Example e;
    e.id = "p" + std::to_string(i);
    e.fields = {{"text", join(words, " ")}};
    c.push_back(e);
  }
  return c;
}

const bsq::BsqSet& questions() {
  static const bsq::BsqSet qs{{"qi", "Does the text mention irrigation?", bsq::Origin::llm, std::nullopt, true, {}},
                              {"qd", "Does the text mention drought?", bsq::Origin::llm, std::nullopt, true, {}}};
  return qs;
}

std::vector<weak::WeakLabel> oracle_labels(const Corpus& c) {
  std::vector<weak::WeakLabel> out;
  for (const auto& e : c) {
    for (const auto& [qid, kw] : {std::pair{"qi", "irrigation"}, std::pair{"qd", "drought"}}) {
      weak::WeakLabel l;
      l.example_id = e.id;
      l.bsq_id = qid;
      l.answer = e.field("text").find(kw) != std::string::npos ? weak::Answer::yes : weak::Answer::no;
      out.push_back(l);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("pair split holds out round(10%)") {
  const auto c = passages(500, 1);
  const auto labels = oracle_labels(c);
  const auto split = nllfg::build_training_set(labels, c, questions(), 3);
  CHECK(split.train.size() == 900);
  CHECK(split.val.size() == 100);
  const std::vector<weak::WeakLabel> seven(labels.begin(), labels.begin() + 7);
  const auto small = nllfg::build_training_set(seven, c, questions(), 3);
  CHECK(small.train.size() == 6);
  CHECK(small.val.size() == 1);
  CHECK(nllfg::build_training_set(labels, c, questions(), 3).train[0].example_id == split.train[0].example_id);
  CHECK_THROWS_AS(nllfg::build_training_set({}, c, questions()), ValidationError);

  const auto& p = split.train[0];
  CHECK_FALSE(p.premise.empty());
  CHECK((p.hypothesis == questions()[0].text || p.hypothesis == questions()[1].text));
}

TEST_CASE("scores are independent sigmoids of the logits") {
  const auto s = nllfg::scores_from_logits(4.0, -4.0);
  CHECK(s.yes == doctest::Approx(0.9820).epsilon(1e-4));
  CHECK(s.no == doctest::Approx(0.0180).epsilon(1e-2));
  const auto z = nllfg::scores_from_logits(0.0, 0.0);
  CHECK(z.yes == 0.5);
  CHECK(z.no == 0.5);
}

TEST_CASE("published generator defaults") {
  const nllfg::Hyper h;
  CHECK(h.epochs == 7);
  CHECK(h.batch_size == 16);
  CHECK(h.learning_rate == 8e-5);
  const auto j = h.to_json();
  CHECK(j["epochs"] == 7);
  CHECK(nllfg::Hyper::from_json(io::Json::parse(j.dump())).learning_rate == 8e-5);
}

TEST_CASE("generator learns a separable keyword task and reloads identically") {
  const auto c = passages(400, 2);
  const auto split = nllfg::build_training_set(oracle_labels(c), c, questions(), 5);
  nllfg::Hyper h;
  h.backbone_id = "tiny";
  h.epochs = 6;
  h.learning_rate = 3e-3;
  h.seed = 4;
  const auto res = nllfg::train(split, h);
  const double acc = nllfg::accuracy(res.model, split.val);
  MESSAGE("validation accuracy " << acc);
  CHECK(acc >= 0.95);
  CHECK(res.model.manifest["hyperparameters"]["epochs"] == 6);

  const auto dir = testing::scratch_dir("nllfg_model");
  nllfg::save(res.model, dir);
  const auto back = nllfg::load(dir);
  CHECK(back.hash() == res.model.hash());
  const auto a = nllfg::score(res.model, "irrigation of the plot", questions()[0].text);
  const auto b = nllfg::score(back, "irrigation of the plot", questions()[0].text);
  CHECK(a.yes == b.yes);
  CHECK(a.no == b.no);
}

TEST_CASE("over-long premises are truncated with a warning") {
  nllfg::Hyper h;
  h.backbone_id = "tiny";
  h.tokenizer.max_length = 16;
  const auto model = nllfg::untrained({"alpha beta gamma", "Is it alpha?"}, h);
  std::vector<std::string> warnings;
  auto old = set_warning_handler([&](const std::string& w) { warnings.push_back(w); });
  std::string premise;
  for (int i = 0; i < 40; ++i) premise += "alpha beta gamma ";
  const auto first = nllfg::score(model, premise, "Is it alpha?");
  const auto second = nllfg::score(model, premise, "Is it alpha?");
  set_warning_handler(old);
  CHECK_FALSE(warnings.empty());
  CHECK(first.yes == second.yes);
}
