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

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nllf/common.hpp"
#include "nllf/feature_bank.hpp"

namespace nllf::models {

struct TreeParams {
  std::string criterion = "gini";
  int max_depth = 5;
  double min_impurity_decrease = 0.0;
  std::uint64_t seed = 0;

  /// Depth 5, no impurity threshold.
  static TreeParams standard();
  /// Depth 10 for n-gram-only matrices.
  static TreeParams bong_only();
  /// Depth 5 with min_impurity_decrease 1.2e-3 for NLLF plus n-grams.
  static TreeParams nllf_bong();

  void validate() const;
  io::OrderedJson to_json() const;
  static TreeParams from_json(const io::Json& j);
};

using ClassCounts = std::array<std::size_t, 2>;  // indexed by Label

struct TreeNode {
  int feature = -1;  // column index; -1 for a leaf
  double threshold = 0.0;
  double gini = 0.0;
  ClassCounts counts{0, 0};
  int left = -1;   // value <= threshold
  int right = -1;  // value > threshold
  int depth = 0;
  Label prediction = Label::negative;

  bool is_leaf() const { return feature < 0; }
};

struct TreeModel {
  TreeParams params;
  std::vector<features::FeatureDescriptor> features;  // one per training column
  std::vector<TreeNode> nodes;                        // nodes[0] is the root

  int depth() const;
  std::size_t leaves() const;
};

/// Per-column row order by ascending value, shared by every tree trained on
/// the same matrix.
class SortedColumns {
 public:
  explicit SortedColumns(const Eigen::MatrixXd& x);
  const std::vector<std::uint32_t>& order(std::size_t column) const { return order_[column]; }

 private:
  std::vector<std::vector<std::uint32_t>> order_;
};

/// Greedy gini CART. Only rows with in_sample[r] != 0 and the listed
/// columns are used. Splits go left on value <= midpoint threshold; ties
/// between candidate splits go to the lowest column position, then the
/// lowest threshold.
TreeModel fit_tree(const Eigen::MatrixXd& x, const SortedColumns& sorted,
                   const std::vector<int>& labels, const std::vector<char>& in_sample,
                   const std::vector<std::size_t>& columns, const TreeParams& params);

/// Trains on every row and column. Throws ValidationError unless both
/// classes are present.
TreeModel train_tree(const features::FeatureMatrix& matrix, const std::vector<Label>& labels,
                     const TreeParams& params);

struct PathStep {
  int node = 0;
  std::size_t column = 0;
  std::string feature_id;
  std::string feature_label;
  double threshold = 0.0;
  double value = 0.0;
  bool went_left = true;  // value <= threshold
  double gini = 0.0;
  ClassCounts counts{0, 0};
};

struct DecisionPath {
  std::vector<PathStep> steps;
  int leaf = 0;
  ClassCounts leaf_counts{0, 0};
  Label prediction = Label::negative;
};

Label predict(const TreeModel& tree, const Eigen::Ref<const Eigen::RowVectorXd>& row);
/// Throws InputError when the row width differs from the training width.
DecisionPath predict_with_path(const TreeModel& tree,
                               const Eigen::Ref<const Eigen::RowVectorXd>& row);
std::vector<Label> predict_all(const TreeModel& tree, const Eigen::MatrixXd& x);

/// Nodes reference columns by descriptor id.
io::OrderedJson tree_to_json(const TreeModel& tree);
TreeModel tree_from_json(const io::Json& j);
/// Graphviz rendering with feature label, threshold, gini and class counts.
std::string tree_to_dot(const TreeModel& tree);

/// Identical structure: same splits, thresholds, counts and predictions.
bool same_structure(const TreeModel& a, const TreeModel& b);

}  // namespace nllf::models
