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

#include <functional>
#include <map>
#include <vector>

#include "nllf/feature_bank.hpp"
#include "nllf/tree.hpp"

namespace nllf::selection {

using Mask = std::vector<char>;

struct GaParams {
  std::size_t population = 50;
  std::size_t generations = 40;
  double crossover_prob = 0.7;
  double mutation_prob = 0.0;  // 0 means 1 / n_features
  std::size_t tournament = 3;
  std::size_t elitism = 1;
  std::uint64_t seed = 0;
  double holdout_frac = 0.2;  // fold-internal fitness slice
  int fitness_max_depth = 5;

  void validate() const;
  io::OrderedJson to_json() const;
  static GaParams from_json(const io::Json& j);
};

struct GaResult {
  Mask best;
  double best_fitness = 0.0;
  std::size_t evaluations = 0;  // distinct masks scored
};

/// Generational GA over bit masks: tournament selection, one-point
/// crossover, bit-flip mutation, elitism. Empty masks are repaired by
/// switching on one random bit. Fitness values are cached per mask. Among
/// equally fit masks the reported best is the one with fewer bits.
GaResult run_ga(std::size_t n_features, const std::function<double(const Mask&)>& fitness,
                const GaParams& params);

/// Headline metric of a depth-limited tree trained on a stratified share
/// of `rows` and scored on the held-in remainder, using only masked columns.
class FoldFitness {
 public:
  FoldFitness(const Eigen::MatrixXd& x, const models::SortedColumns& sorted,
              const std::vector<int>& labels, const std::vector<std::size_t>& rows,
              MetricMode mode, const GaParams& params, std::uint64_t seed);

  double operator()(const Mask& mask) const;

 private:
  const Eigen::MatrixXd& x_;
  const models::SortedColumns& sorted_;
  const std::vector<int>& labels_;
  std::vector<char> inner_;
  std::vector<std::size_t> holdout_;
  std::vector<Label> holdout_gold_;
  MetricMode mode_;
  models::TreeParams tree_;
};

/// Stratified k-fold assignment; fold index per row. Throws
/// ValidationError if a class has fewer rows than folds.
std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t folds,
                                          std::uint64_t seed);

struct FoldOutcome {
  Mask mask;
  double fitness = 0.0;
  std::size_t evaluations = 0;
};

struct SelectionReport {
  std::size_t folds = 15;
  std::size_t threshold = 5;
  GaParams ga;
  std::string fitness_definition;
  std::vector<std::string> feature_ids;
  std::vector<std::size_t> counts;
  std::vector<char> selected;
  std::vector<FoldOutcome> fold_outcomes;

  std::vector<std::size_t> selected_columns() const;
  /// Selection with a different threshold; never adds features when raised.
  std::vector<char> at_threshold(std::size_t threshold) const;
};

/// ceil(folds / 3).
std::size_t one_third_threshold(std::size_t folds);

/// Runs the GA on the training part of every fold and keeps features chosen
/// in at least ceil(folds / 3) folds.
SelectionReport select(const features::FeatureMatrix& matrix, const std::vector<Label>& labels,
                       std::size_t folds, MetricMode mode, const GaParams& params);

io::OrderedJson report_to_json(const SelectionReport& report);
SelectionReport report_from_json(const io::Json& j);

}  // namespace nllf::selection
