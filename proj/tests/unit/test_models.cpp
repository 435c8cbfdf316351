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

#include <atomic>

#include "nllf/models.hpp"
#include "test_util.hpp"

using namespace nllf;
using namespace nllf::models;

namespace {

Corpus answers(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = "a" + std::to_string(i);
    const bool incoherent = i % 2 == 0;
    e.fields = {{"question", "¿Qué es la fotosíntesis?"},
                {"answer", incoherent ? "jajaja no sé " + std::to_string(i) : "Proceso de las plantas " + std::to_string(i)}};
    e.gold = incoherent ? Label::positive : Label::negative;
    c.push_back(e);
  }
  return c;
}

PromptBaselineConfig iad_prompt(const std::string& name) {
  return PromptBaselineConfig::from_json(
      io::Json::parse(read_file(testing::source_path("data/tasks/iad/prompts/" + name + ".json"))));
}

llm::Gateway gateway_of(llm::FunctionBackend::Fn fn, std::atomic<int>* calls = nullptr) {
  return llm::Gateway(std::make_shared<llm::FunctionBackend>([fn, calls](const llm::Messages& m) {
                        if (calls) ++*calls;
                        return fn(m);
                      }),
                      llm::ResponseCache{});
}

features::FeatureMatrix extras_for(const Corpus& c, std::size_t width) {
  features::FeatureMatrix m;
  m.values.resize(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < c.size(); ++r) {
    m.row_ids.push_back(c[r].id);
    for (std::size_t k = 0; k < width; ++k) {
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          (*c[r].gold == Label::positive ? 1.0 : 0.0) + 0.1 * static_cast<double>(k);
    }
  }
  for (std::size_t k = 0; k < width; ++k) {
    m.descriptors.push_back({"x" + std::to_string(k), features::FeatureKind::ef, "x", ""});
  }
  return m;
}

}  // namespace

TEST_CASE("encoder presets") {
  const auto v = EncoderHyper::vanilla();
  CHECK(v.learning_rate == 1e-5);
  CHECK(v.epochs == 8);
  CHECK(v.batch_size == 32);
  CHECK(EncoderHyper::augmented().learning_rate == 5e-6);
  io::Json over = {{"epochs", 2}};
  const auto h = EncoderHyper::from_json(over, EncoderHyper::augmented());
  CHECK(h.epochs == 2);
  CHECK(h.learning_rate == 5e-6);
}

TEST_CASE("zero extra features reduce to the plain encoder") {
  const auto train = answers(24);
  const auto val = answers(8);
  auto hyper = EncoderHyper::vanilla();
  hyper.backbone_id = "tiny";
  hyper.epochs = 2;
  hyper.batch_size = 8;
  hyper.learning_rate = 1e-3;
  const auto plain = train_encoder(train, extras_for(train, 0), val, extras_for(val, 0), hyper);
  const auto same = train_encoder(train, extras_for(train, 0), val, extras_for(val, 0), hyper);
  const auto wide = train_encoder(train, extras_for(train, 3), val, extras_for(val, 3), hyper);
  CHECK(plain.model.extra_width() == 0);
  CHECK(plain.model.parameter_count() == same.model.parameter_count());
  CHECK(wide.model.parameter_count() == plain.model.parameter_count() + 3 * 2);
  CHECK(predict_encoder_all(plain.model, val, extras_for(val, 0)) ==
        predict_encoder_all(same.model, val, extras_for(val, 0)));

  const auto dir = testing::scratch_dir("encoder_model");
  save_encoder(wide.model, dir);
  const auto back = load_encoder(dir);
  CHECK(back.feature_ids == wide.model.feature_ids);
  CHECK(predict_encoder_all(back, val, extras_for(val, 3)) == predict_encoder_all(wide.model, val, extras_for(val, 3)));

  auto misaligned = extras_for(val, 3);
  std::swap(misaligned.row_ids[0], misaligned.row_ids[1]);
  CHECK_THROWS_AS(predict_encoder_all(wide.model, val, misaligned), InputError);
}

TEST_CASE("scripted incoherent answers map to the positive class") {
  const auto cfg = iad_prompt("vanilla");
  auto gw = gateway_of([](const llm::Messages&) { return std::string("La respuesta es incoherente."); });
  const auto pool = answers(4);
  const auto out = prompt_classify(pool, pool, cfg, gw, {}, Label::negative);
  REQUIRE(out.size() == 4);
  for (const auto& v : out) {
    CHECK(v.label == Label::positive);
    CHECK_FALSE(v.abstained);
  }
}

TEST_CASE("verdict extraction prefers the final answer") {
  const auto cfg = iad_prompt("cot");
  CHECK(extract_verdict("Parece coherente al inicio... Respuesta final: incoherente", cfg) == Label::positive);
  CHECK(extract_verdict("Respuesta final: coherente.", cfg) == Label::negative);
  CHECK_FALSE(extract_verdict("No lo sé.", cfg).has_value());
}

TEST_CASE("four-shot configs need exactly four training exemplars") {
  auto j = io::Json::parse(read_file(testing::source_path("data/tasks/iad/prompts/vanilla.json")));
  j["shots"] = 4;
  j["exemplars"] = {{{"id", "a0"}, {"label", "positive"}}, {{"id", "a1"}, {"label", "negative"}},
                    {{"id", "a2"}, {"label", "positive"}}};
  CHECK_THROWS_AS(PromptBaselineConfig::from_json(j), ConfigError);
  j["exemplars"].push_back({{"id", "a3"}, {"label", "negative"}});
  const auto cfg = PromptBaselineConfig::from_json(j);
  CHECK_NOTHROW(check_exemplars(cfg, answers(6)));
  CHECK_THROWS_AS(check_exemplars(cfg, answers(2)), ValidationError);

  // Exemplars become user/assistant turns ahead of the query.
  llm::Messages seen;
  auto gw = gateway_of([&](const llm::Messages& m) {
    seen = m;
    return std::string("incoherente");
  });
  const auto pool = answers(6);
  prompt_classify({pool[5]}, pool, cfg, gw, {}, Label::negative);
  CHECK(seen.size() == 1 + 2 * 4 + 1);
}

TEST_CASE("unextractable verdicts abstain with the fallback label") {
  const auto cfg = iad_prompt("vanilla");
  auto gw = gateway_of([](const llm::Messages&) { return std::string("No sabría decir."); });
  const auto pool = answers(3);
  const auto out = prompt_classify(pool, pool, cfg, gw, {}, majority_label(pool));
  for (const auto& v : out) {
    CHECK(v.abstained);
    CHECK(v.label == Label::positive);
  }
  CHECK(majority_label(answers(4)) == Label::negative);
}

TEST_CASE("self-ask answers follow-ups and enforces the cap") {
  const auto cfg = iad_prompt("self_ask");
  std::atomic<int> calls{0};
  auto gw = gateway_of(
      [](const llm::Messages& m) -> std::string {
        const auto& last = m.back().text;
        if (last.find("Responde brevemente") != std::string::npos) return "Sí, es una broma.";
        if (last.find("No más preguntas") != std::string::npos) return "Respuesta final: incoherente";
        std::string all;
        for (const auto& msg : m) all += msg.text;
        if (all.find("jajaja no sé 0") != std::string::npos) {
          return "Follow up: ¿La respuesta es una broma?";
        }
        std::size_t turns = 0;
        for (const auto& msg : m) turns += msg.role == llm::Role::assistant;
        return turns >= 1 ? "Respuesta final: coherente" : "Follow up: ¿Responde a la pregunta?";
      },
      &calls);
  const auto pool = answers(2);
  const auto out = prompt_classify(pool, pool, cfg, gw, {}, Label::negative);
  REQUIRE(out.size() == 2);
  // The first example keeps asking, so the cap is reached and a final answer is forced.
  CHECK(out[0].follow_ups == cfg.max_follow_ups);
  CHECK(out[0].label == Label::positive);
  CHECK(out[1].follow_ups == 1);
  CHECK(out[1].label == Label::negative);
  bool saw_intermediate = false;
  for (const auto& m : out[1].transcript) saw_intermediate |= m.text.find("Respuesta intermedia") != std::string::npos;
  CHECK(saw_intermediate);

  // Cached rerun: no backend calls and identical verdicts.
  const int before = calls;
  const auto again = prompt_classify(pool, pool, cfg, gw, {}, Label::negative);
  CHECK(calls == before);
  CHECK(again[0].transcript == out[0].transcript);
  CHECK(again[1].label == out[1].label);

  const auto dir = testing::scratch_dir("transcripts");
  save_transcripts(dir + "/t.jsonl", out, cfg);
  CHECK(split_lines(read_file(dir + "/t.jsonl")).size() >= 2);
}
