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
#include "nllf/feature_selection.hpp"
#include "nllf/tree.hpp"
#include "test_util.hpp"

using namespace nllf;
using namespace nllf::models;

namespace {

features::FeatureMatrix matrix_of(const Eigen::MatrixXd& x, features::FeatureKind kind = features::FeatureKind::ef) {
  features::FeatureMatrix m;
  m.values = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) m.row_ids.push_back("r" + std::to_string(r));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    m.descriptors.push_back({"f" + std::to_string(c), kind, "feature " + std::to_string(c), ""});
  }
  return m;
}

double gini(double pos, double total) {
  if (total == 0) return 0;
  const double p = pos / total;
  return 1 - p * p - (1 - p) * (1 - p);
}

// Planted data: label = (x0 > 0.5) and (x1 > 0.5), other columns noise.
struct Planted {
  features::FeatureMatrix m;
  std::vector<Label> labels;
};

Planted planted(std::size_t rows, std::size_t cols, std::uint64_t seed, double noise = 0.0) {
  Rng rng(seed);
  Eigen::MatrixXd x(rows, cols);
  std::vector<Label> y;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) x(r, c) = uniform_unit(rng);
    bool pos = x(r, 0) > 0.5 && x(r, 1) > 0.5;
    if (uniform_unit(rng) < noise) pos = !pos;
    y.push_back(pos ? Label::positive : Label::negative);
  }
  return {matrix_of(x), y};
}

}  // namespace

TEST_CASE("tree presets") {
  CHECK(TreeParams::standard().max_depth == 5);
  CHECK(TreeParams::standard().min_impurity_decrease == 0.0);
  CHECK(TreeParams::bong_only().max_depth == 10);
  CHECK(TreeParams::nllf_bong().min_impurity_decrease == 1.2e-3);
}

TEST_CASE("root split matches a brute-force search over single splits") {
  Rng rng(3);
  const std::size_t rows = 60;
  Eigen::MatrixXd x(rows, 3);
  std::vector<Label> y;
  for (std::size_t r = 0; r < rows; ++r) {
    for (int c = 0; c < 3; ++c) x(r, c) = std::round(uniform_unit(rng) * 10);
    y.push_back(x(r, 1) + 0.3 * x(r, 2) + 3 * uniform_unit(rng) > 8 ? Label::positive : Label::negative);
  }
  // Brute force: every column, every midpoint between distinct values.
  double best = -1;
  int best_col = -1;
  double best_thr = 0;
  double pos_all = 0;
  for (auto l : y) pos_all += l == Label::positive;
  const double parent = gini(pos_all, rows);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> vals(x.col(c).data(), x.col(c).data() + rows);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double thr = (vals[k] + vals[k + 1]) / 2;
      double ln = 0, lp = 0, rn = 0, rp = 0;
      for (std::size_t r = 0; r < rows; ++r) {
        const bool pos = y[r] == Label::positive;
        if (x(r, c) <= thr) (ln += 1, lp += pos);
        else (rn += 1, rp += pos);
      }
      const double gain = parent - (ln / rows) * gini(lp, ln) - (rn / rows) * gini(rp, rn);
      if (gain > best + 1e-12) {
        best = gain;
        best_col = c;
        best_thr = thr;
      }
    }
  }
  const auto tree = train_tree(matrix_of(x), y, TreeParams::standard());
  CHECK(tree.nodes[0].feature == best_col);
  CHECK(tree.nodes[0].threshold == doctest::Approx(best_thr));
}

TEST_CASE("a single separating feature gives a depth-1 tree") {
  Eigen::MatrixXd x(8, 2);
  x << 0, 5, 1, 3, 2, 9, 3, 1, 10, 2, 11, 8, 12, 4, 13, 6;
  const std::vector<Label> y{Label::negative, Label::negative, Label::negative, Label::negative,
                             Label::positive, Label::positive, Label::positive, Label::positive};
  const auto tree = train_tree(matrix_of(x), y, TreeParams::standard());
  CHECK(tree.depth() == 1);
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == 6.5);
  CHECK(tree.leaves() == 2);
}

TEST_CASE("single-class labels are rejected and pure data gives a stump") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 2);
  CHECK_THROWS_AS(train_tree(matrix_of(x), std::vector<Label>(5, Label::positive), TreeParams::standard()),
                  ValidationError);
  // Identical rows with mixed labels cannot be split.
  Eigen::MatrixXd same = Eigen::MatrixXd::Ones(4, 2);
  const std::vector<Label> y{Label::positive, Label::negative, Label::negative, Label::positive};
  const auto stump = train_tree(matrix_of(same), y, TreeParams::standard());
  CHECK(stump.nodes.size() == 1);
  // Tie in the leaf goes to negative.
  CHECK(stump.nodes[0].prediction == Label::negative);
  const auto path = predict_with_path(stump, same.row(0));
  CHECK(path.steps.empty());
  CHECK(path.prediction == Label::negative);
  const std::string doc = eval::render_explanation(stump, Example{"r0", {{"text", "t"}}, std::nullopt}, path);
  CHECK(doc.find("negative") != std::string::npos);
}

TEST_CASE("planted rule gives the known two-step path") {
  const auto data = planted(400, 4, 9);
  const auto tree = train_tree(data.m, data.labels, TreeParams::standard());
  Eigen::RowVectorXd row(4);
  row << 0.9, 0.9, 0.2, 0.2;
  const auto path = predict_with_path(tree, row);
  REQUIRE(path.steps.size() >= 2);
  std::set<std::size_t> cols{path.steps[0].column, path.steps[1].column};
  CHECK(cols == std::set<std::size_t>{0, 1});
  CHECK(path.prediction == Label::positive);
  CHECK(eval::path_is_faithful(tree, path, row));
  const auto& root = tree.nodes[0];
  CHECK(path.steps[0].counts == root.counts);

  Eigen::RowVectorXd wide(5);
  wide.setZero();
  CHECK_THROWS_AS(predict_with_path(tree, wide), InputError);

  auto tampered = path;
  tampered.steps[0].went_left = !tampered.steps[0].went_left;
  CHECK_FALSE(eval::path_is_faithful(tree, tampered, row));
}

TEST_CASE("explanations show the question text for NLLF columns") {
  Eigen::MatrixXd x(6, 2);
  x << 0.9, 0.1, 0.8, 0.2, 0.7, 0.3, 0.2, 0.8, 0.1, 0.9, 0.3, 0.7;
  auto m = matrix_of(x, features::FeatureKind::nllf);
  m.descriptors[0] = {"nllf:q7:yes", features::FeatureKind::nllf, "Does the abstract mention rice?", "q7"};
  m.descriptors[1] = {"nllf:q7:no", features::FeatureKind::nllf, "Does the abstract mention rice?", "q7"};
  const std::vector<Label> y{Label::positive, Label::positive, Label::positive,
                             Label::negative, Label::negative, Label::negative};
  const auto tree = train_tree(m, y, TreeParams::standard());
  Example e{"r0", {{"text", "Rice paddies"}}, Label::positive};
  const auto doc = eval::render_explanation(tree, e, predict_with_path(tree, x.row(0)));
  CHECK(doc.find("Does the abstract mention rice?") != std::string::npos);
  CHECK(doc.find("Rice paddies") != std::string::npos);
  const auto dot = tree_to_dot(tree);
  CHECK(dot.find("Does the abstract mention rice?") != std::string::npos);
}

TEST_CASE("trees round-trip through JSON") {
  const auto data = planted(200, 3, 1, 0.05);
  const auto tree = train_tree(data.m, data.labels, TreeParams::nllf_bong());
  const auto back = tree_from_json(io::Json::parse(tree_to_json(tree).dump()));
  CHECK(same_structure(tree, back));
  CHECK(predict_all(back, data.m.values) == predict_all(tree, data.m.values));
  CHECK(back.params.min_impurity_decrease == 1.2e-3);
}

TEST_CASE("min_impurity_decrease prunes weak splits") {
  const auto data = planted(300, 6, 2, 0.2);
  auto loose = TreeParams::standard();
  auto strict = TreeParams::standard();
  strict.min_impurity_decrease = 0.02;
  CHECK(train_tree(data.m, data.labels, strict).leaves() < train_tree(data.m, data.labels, loose).leaves());
}

TEST_CASE("GA over a planted pair keeps both signal columns") {
  const auto data = planted(240, 10, 4);
  std::vector<int> y;
  for (auto l : data.labels) y.push_back(static_cast<int>(l));
  const SortedColumns sorted(data.m.values);
  std::vector<std::size_t> rows(240);
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
  selection::GaParams p;
  p.seed = 2;
  const selection::FoldFitness fit(data.m.values, sorted, y, rows, MetricMode::macro, p, 2);
  double optimum = 0;
  for (std::size_t bits = 1; bits < 1024; ++bits) {
    selection::Mask mask(10, 0);
    for (std::size_t c = 0; c < 10; ++c) mask[c] = (bits >> c) & 1U;
    optimum = std::max(optimum, fit(mask));
  }
  const auto ga = selection::run_ga(10, std::cref(fit), p);
  CHECK(ga.best_fitness == optimum);
  CHECK(ga.best[0] == 1);
  CHECK(ga.best[1] == 1);
  const auto again = selection::run_ga(10, std::cref(fit), p);
  CHECK(again.best == ga.best);
}

TEST_CASE("GA with one feature keeps it") {
  const auto ga = selection::run_ga(1, [](const selection::Mask&) { return 0.3; }, selection::GaParams{});
  CHECK(ga.best == selection::Mask{1});
}

TEST_CASE("one-third threshold arithmetic") {
  CHECK(selection::one_third_threshold(15) == 5);
  selection::SelectionReport r;
  r.counts = {5, 4, 15, 0};
  r.selected = {1, 0, 1, 0};
  CHECK(r.selected_columns() == std::vector<std::size_t>{0, 2});
  CHECK(r.at_threshold(15) == std::vector<char>{0, 0, 1, 0});
  CHECK(r.at_threshold(4) == std::vector<char>{1, 1, 1, 0});
}

TEST_CASE("selection over folds and its report") {
  const auto data = planted(300, 5, 6);
  selection::GaParams p;
  p.population = 16;
  p.generations = 8;
  const auto rep = selection::select(data.m, data.labels, 15, MetricMode::macro, p);
  CHECK(rep.threshold == 5);
  CHECK(rep.fold_outcomes.size() == 15);
  for (std::size_t c = 0; c < 5; ++c) CHECK(static_cast<bool>(rep.selected[c]) == (rep.counts[c] >= 5));
  CHECK(rep.selected[0]);
  CHECK(rep.selected[1]);
  const auto back = selection::report_from_json(io::Json::parse(selection::report_to_json(rep).dump()));
  CHECK(back.selected == rep.selected);
  CHECK(back.counts == rep.counts);
  CHECK(selection::report_to_json(back).dump() == selection::report_to_json(rep).dump());

  auto saturated = rep;
  std::fill(saturated.counts.begin(), saturated.counts.end(), 15);
  CHECK(saturated.at_threshold(5) == std::vector<char>(5, 1));
}

TEST_CASE("stratified folds need enough rows per class") {
  std::vector<int> y(40, 0);
  for (int i = 0; i < 10; ++i) y[i] = 1;
  const auto folds = selection::stratified_folds(y, 5, 1);
  for (std::size_t f = 0; f < 5; ++f) {
    int pos = 0;
    for (std::size_t r = 0; r < y.size(); ++r) pos += folds[r] == f && y[r] == 1;
    CHECK(pos == 2);
  }
  try {
    selection::stratified_folds(y, 15, 1);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("fewer folds") != std::string::npos);
  }
}
