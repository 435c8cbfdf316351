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

#include "nllf/evaluation.hpp"
#include "test_util.hpp"

using namespace nllf;
using namespace nllf::eval;

TEST_CASE("confusion arithmetic on the asymmetric fixture") {
  const Confusion c{85, 15, 885, 15};
  const auto r = report_from_confusion(c, MetricMode::positive_class);
  CHECK(r.positive.precision == doctest::Approx(0.85));
  CHECK(r.positive.recall == doctest::Approx(0.85));
  CHECK(r.positive.f1 == doctest::Approx(0.85));
  CHECK(r.positive.support == 100);
  CHECK(r.negative.support == 900);
  CHECK(r.headline == r.positive.f1);
  CHECK(report_from_confusion(c, MetricMode::macro).headline == doctest::Approx((0.85 + 885.0 / 900.0) / 2));
}

TEST_CASE("perfect predictions and undefined ratios") {
  const std::vector<Label> y{Label::positive, Label::negative, Label::negative};
  const auto r = score(y, y, MetricMode::macro);
  CHECK(r.macro_f1 == 1.0);
  CHECK(r.accuracy == 1.0);
  CHECK(r.flags.empty());

  const std::vector<Label> none(3, Label::negative);
  const auto z = score(none, y, MetricMode::positive_class);
  CHECK(z.positive.precision == 0.0);
  CHECK(std::find(z.flags.begin(), z.flags.end(), "positive.precision") != z.flags.end());

  CHECK_THROWS_AS(score({Label::positive}, y, MetricMode::macro), InputError);
  CHECK_THROWS_AS(score({}, {}, MetricMode::macro), InputError);
}

TEST_CASE("emitted JSON recomputes from its confusion counts") {
  const auto r = report_from_confusion(Confusion{12, 7, 40, 3}, MetricMode::macro);
  const auto j = report_to_json(r);
  const double tp = j["confusion"]["tp"], fp = j["confusion"]["fp"], fn = j["confusion"]["fn"];
  CHECK(j["positive"]["f1"].get<double>() == 2 * tp / (2 * tp + fp + fn));
  CHECK(report_to_markdown(r, "demo").find("demo") != std::string::npos);
  const auto row = table_row("tree", "NLLF", {r});
  CHECK(row.find("tree") != std::string::npos);
  CHECK(table_header({"SAC"}).find("SAC") != std::string::npos);
}

TEST_CASE("audit of identical verdicts and exclusions") {
  std::vector<AuditItem> items;
  for (int i = 0; i < 10; ++i) {
    const Label l = i % 3 ? Label::positive : Label::negative;
    items.push_back({"i" + std::to_string(i), l, l, l});
  }
  items.push_back({"unlabelled", std::nullopt, Label::positive, Label::negative});
  const auto res = audit_nllfg(items);
  CHECK(res.items == 10);
  CHECK(res.excluded == 1);
  CHECK(report_to_json(res.nllfg).dump() == report_to_json(res.llm).dump());
  CHECK(res.nllfg_llm_agreement == 1.0);
  CHECK_FALSE(res.compounded.has_value());
}

TEST_CASE("audit reproduces the expert table") {
  const auto items = load_audit(testing::source_path("tests/fixtures/audit_table3.csv"));
  const auto res = audit_nllfg(items, 0.70);
  CHECK(res.llm.accuracy == doctest::Approx(0.78));
  CHECK(res.nllfg.accuracy == doctest::Approx(0.68));
  CHECK(*res.compounded == doctest::Approx(0.546));
  const auto md = audit_to_markdown(res);
  CHECK(md.find("0.546") != std::string::npos);
  CHECK(audit_to_json(res)["llm"]["accuracy"].get<double>() == doctest::Approx(0.78));
}
