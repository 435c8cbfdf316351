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

#include <set>

#include "nllf/data_model.hpp"
#include "test_util.hpp"

using namespace nllf;

namespace {

Corpus labelled(std::size_t n, std::size_t positives) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = "ex" + std::to_string(i);
    e.fields = {{"title", "Title " + std::to_string(i)}, {"abstract", "Abstract body " + std::to_string(i)}};
    e.gold = i < positives ? Label::positive : Label::negative;
    c.push_back(e);
  }
  return c;
}

}  // namespace

TEST_CASE("corpus round-trips through JSON-Lines with its label balance") {
  const auto dir = testing::scratch_dir("corpus");
  const auto corpus = labelled(1983, 993);
  save_corpus(dir + "/c.jsonl", corpus);
  const auto back = load_corpus(dir + "/c.jsonl", {"title", "abstract"});
  CHECK(back == corpus);
  std::size_t pos = 0;
  for (const auto& e : back) pos += *e.gold == Label::positive;
  CHECK(static_cast<double>(pos) / back.size() == doctest::Approx(0.501).epsilon(0.001));
}

TEST_CASE("empty corpus file loads as an empty collection") {
  const auto dir = testing::scratch_dir("corpus_empty");
  write_file(dir + "/e.jsonl", "");
  CHECK(load_corpus(dir + "/e.jsonl").empty());
}

TEST_CASE("corpus loading rejects missing fields, bad lines and duplicate ids") {
  const auto dir = testing::scratch_dir("corpus_bad");
  write_file(dir + "/missing.jsonl",
             "{\"id\":\"a\",\"fields\":{\"title\":\"t\",\"abstract\":\"x\"},\"gold\":\"positive\"}\n"
             "{\"id\":\"b\",\"fields\":{\"title\":\"t\"},\"gold\":\"negative\"}\n");
  try {
    load_corpus(dir + "/missing.jsonl", {"title", "abstract"});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  write_file(dir + "/broken.jsonl", "{\"id\":\"a\",\"fields\":{\"text\":\"t\"}}\n{not json\n");
  try {
    load_corpus(dir + "/broken.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  write_file(dir + "/dup.jsonl", "{\"id\":\"a\",\"fields\":{\"text\":\"t\"}}\n{\"id\":\"a\",\"fields\":{\"text\":\"u\"}}\n");
  CHECK_THROWS_AS(load_corpus(dir + "/dup.jsonl"), ValidationError);
}

TEST_CASE("split sizes follow the floor rule with the remainder in train") {
  SplitSpec spec;
  spec.seed = 7;
  const auto p = split(labelled(1983, 993), spec);
  CHECK(p.train.size() == 1389);
  CHECK(p.val.size() == 198);
  CHECK(p.test.size() == 396);

  std::set<std::string> ids;
  for (const auto* part : {&p.train, &p.val, &p.test}) {
    for (const auto& e : *part) ids.insert(e.id);
  }
  CHECK(ids.size() == 1983);
}

TEST_CASE("degenerate and repeated splits") {
  SplitSpec all;
  all.train_frac = 1.0;
  all.val_frac = 0.0;
  all.test_frac = 0.0;
  const auto p = split(labelled(10, 5), all);
  CHECK(p.train.size() == 10);
  CHECK(p.val.empty());
  CHECK(p.test.empty());

  SplitSpec spec;
  spec.seed = 3;
  const auto corpus = labelled(100, 40);
  const auto a = split(corpus, spec);
  const auto b = split(corpus, spec);
  CHECK(corpus_to_jsonl(a.train) == corpus_to_jsonl(b.train));
  CHECK(corpus_to_jsonl(a.test) == corpus_to_jsonl(b.test));
}

TEST_CASE("split refuses unlabelled examples") {
  auto corpus = labelled(20, 10);
  corpus[4].gold.reset();
  CHECK_THROWS_AS(split(corpus, SplitSpec{}), ValidationError);
}

TEST_CASE("fixed-test split keeps the given test ids") {
  SplitSpec spec;
  spec.mode = SplitMode::fixed_test;
  spec.fixed_test_ids = {"ex1", "ex5", "ex9"};
  const auto p = split(labelled(30, 15), spec);
  REQUIRE(p.test.size() == 3);
  CHECK(p.test[0].id == "ex1");
  CHECK(p.train.size() + p.val.size() == 27);
}

TEST_CASE("split manifest rebuilds the same partition") {
  const auto dir = testing::scratch_dir("split_manifest");
  const auto corpus = labelled(50, 20);
  SplitSpec spec;
  spec.seed = 11;
  const auto p = split(corpus, spec);
  save_split_manifest(dir + "/split.json", p, spec);
  SplitSpec back_spec;
  const auto q = load_split_manifest(dir + "/split.json", corpus, &back_spec);
  CHECK(q.train == p.train);
  CHECK(q.val == p.val);
  CHECK(q.test == p.test);
  CHECK(back_spec.seed == 11);
}

TEST_CASE("sample_fraction sizes") {
  // Train plus validation pool of the screening task.
  CHECK(sample_fraction(labelled(1587, 800), 0.013, 1).size() == 21);
  CHECK(sample_fraction(labelled(50, 20), 0.001, 1).size() == 1);
  const auto pool = labelled(40, 20);
  const auto full = sample_fraction(pool, 1.0, 9);
  CHECK(full.size() == 40);
  CHECK(full == sample_fraction(pool, 1.0, 9));
  CHECK(full != pool);
  CHECK_THROWS_AS(sample_fraction({}, 0.5, 1), ValidationError);
}

TEST_CASE("premise joins named fields in order") {
  Example e;
  e.fields = {{"question", "Why?"}, {"answer", "Because."}};
  CHECK(e.premise().find("question: Why?") == 0);
  CHECK(e.premise().find("answer: Because.") != std::string::npos);
  Example single;
  single.fields = {{"text", "plain"}};
  CHECK(single.premise() == "plain");
}

TEST_CASE("task presets") {
  const auto sac = TaskConfig::abstract_screening();
  CHECK(sac.p_q == 0.013);
  CHECK(sac.curated_count == 13);
  CHECK(sac.augmented_count == 109);
  const auto iad = TaskConfig::incoherence_detection();
  CHECK(iad.p_q == 0.0015);
  CHECK(iad.curated_count == 10);
  CHECK(iad.augmented_count == 66);
}
