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

#include "nllf/feature_selection.hpp"

#include <algorithm>
#include <numeric>

#include "nllf/evaluation.hpp"

namespace nllf::selection {

void GaParams::validate() const {
  if (population < 2) throw ConfigError("GA population must be at least 2");
  if (tournament < 1) throw ConfigError("GA tournament size must be at least 1");
  if (elitism >= population) throw ConfigError("GA elitism must be below the population size");
  if (!(crossover_prob >= 0 && crossover_prob <= 1)) throw ConfigError("crossover_prob must be in [0, 1]");
  if (!(mutation_prob >= 0 && mutation_prob <= 1)) throw ConfigError("mutation_prob must be in [0, 1]");
  if (!(holdout_frac > 0 && holdout_frac < 1)) throw ConfigError("holdout_frac must be in (0, 1)");
  if (fitness_max_depth < 1) throw ConfigError("fitness_max_depth must be at least 1");
}

io::OrderedJson GaParams::to_json() const {
  io::OrderedJson j;
  j["population"] = population;
  j["generations"] = generations;
  j["crossover_prob"] = crossover_prob;
  j["mutation_prob"] = mutation_prob;
  j["tournament"] = tournament;
  j["elitism"] = elitism;
  j["seed"] = seed;
  j["holdout_frac"] = holdout_frac;
  j["fitness_max_depth"] = fitness_max_depth;
  return j;
}

GaParams GaParams::from_json(const io::Json& j) {
  GaParams p;
  p.population = j.value("population", p.population);
  p.generations = j.value("generations", p.generations);
  p.crossover_prob = j.value("crossover_prob", p.crossover_prob);
  p.mutation_prob = j.value("mutation_prob", p.mutation_prob);
  p.tournament = j.value("tournament", p.tournament);
  p.elitism = j.value("elitism", p.elitism);
  p.seed = j.value("seed", p.seed);
  p.holdout_frac = j.value("holdout_frac", p.holdout_frac);
  p.fitness_max_depth = j.value("fitness_max_depth", p.fitness_max_depth);
  p.validate();
  return p;
}

GaResult run_ga(std::size_t n, const std::function<double(const Mask&)>& fitness,
                const GaParams& params) {
  params.validate();
  if (n == 0) throw InputError("cannot select from zero features");
  Rng rng(params.seed);
  std::map<Mask, double> cache;
  auto eval = [&](const Mask& m) {
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    const double f = fitness(m);
    cache.emplace(m, f);
    return f;
  };
  auto repair = [&](Mask& m) {
    if (std::none_of(m.begin(), m.end(), [](char b) { return b != 0; })) m[uniform_index(rng, n)] = 1;
  };

  // Best-so-far tracking: equal fitness goes to the smaller mask.
  auto bits = [](const Mask& m) { return std::count(m.begin(), m.end(), char{1}); };
  auto better = [&](double fa, const Mask& a, double fb, const Mask& b) {
    return fa > fb || (fa == fb && bits(a) < bits(b));
  };

  GaResult result;
  if (n == 1) {
    result.best = Mask{1};
    result.best_fitness = eval(result.best);
    result.evaluations = 1;
    return result;
  }
  const double p_mut = params.mutation_prob > 0 ? params.mutation_prob : 1.0 / static_cast<double>(n);

  std::vector<Mask> pop(params.population, Mask(n, 0));
  for (auto& m : pop) {
    for (auto& b : m) b = uniform_unit(rng) < 0.5 ? 1 : 0;
    repair(m);
  }
  std::vector<double> fit(pop.size());
  bool have_best = false;
  auto score_all = [&] {
    for (std::size_t i = 0; i < pop.size(); ++i) {
      fit[i] = eval(pop[i]);
      if (!have_best || better(fit[i], pop[i], result.best_fitness, result.best)) {
        result.best = pop[i];
        result.best_fitness = fit[i];
        have_best = true;
      }
    }
  };
  score_all();

  auto tournament = [&]() -> const Mask& {
    std::size_t winner = uniform_index(rng, pop.size());
    for (std::size_t k = 1; k < params.tournament; ++k) {
      const std::size_t c = uniform_index(rng, pop.size());
      if (fit[c] > fit[winner] || (fit[c] == fit[winner] && c < winner)) winner = c;
    }
    return pop[winner];
  };

  for (std::size_t g = 0; g < params.generations; ++g) {
    std::vector<std::size_t> rank(pop.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });
    std::vector<Mask> next;
    for (std::size_t e = 0; e < params.elitism; ++e) next.push_back(pop[rank[e]]);
    while (next.size() < pop.size()) {
      Mask a = tournament();
      Mask b = tournament();
      if (uniform_unit(rng) < params.crossover_prob) {
        const std::size_t cut = 1 + uniform_index(rng, n - 1);
        for (std::size_t i = cut; i < n; ++i) std::swap(a[i], b[i]);
      }
      for (Mask* child : {&a, &b}) {
        for (auto& bit : *child) {
          if (uniform_unit(rng) < p_mut) bit = bit ? 0 : 1;
        }
        repair(*child);
        if (next.size() < pop.size()) next.push_back(std::move(*child));
      }
    }
    pop = std::move(next);
    score_all();
  }
  result.evaluations = cache.size();
  return result;
}

FoldFitness::FoldFitness(const Eigen::MatrixXd& x, const models::SortedColumns& sorted,
                         const std::vector<int>& labels, const std::vector<std::size_t>& rows,
                         MetricMode mode, const GaParams& params, std::uint64_t seed)
    : x_(x), sorted_(sorted), labels_(labels), inner_(labels.size(), 0), mode_(mode) {
  tree_.max_depth = params.fitness_max_depth;
  // Stratified held-in slice: holdout_frac of each class, at least one row
  // per class when the class has two or more rows.
  Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (auto r : rows) {
      if (labels[r] == cls) members.push_back(r);
    }
    shuffle(members, rng);
    std::size_t k = static_cast<std::size_t>(std::llround(params.holdout_frac * static_cast<double>(members.size())));
    if (k == 0 && members.size() >= 2) k = 1;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i < k) holdout_.push_back(members[i]);
      else inner_[members[i]] = 1;
    }
  }
  std::sort(holdout_.begin(), holdout_.end());
  for (auto r : holdout_) holdout_gold_.push_back(static_cast<Label>(labels[r]));
  if (holdout_.empty() || std::none_of(inner_.begin(), inner_.end(), [](char c) { return c != 0; })) {
    throw ValidationError("fold is too small for a fitness hold-out");
  }
}

double FoldFitness::operator()(const Mask& mask) const {
  std::vector<std::size_t> columns;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (mask[c]) columns.push_back(c);
  }
  const auto tree = models::fit_tree(x_, sorted_, labels_, inner_, columns, tree_);
  std::vector<Label> pred;
  pred.reserve(holdout_.size());
  for (auto r : holdout_) pred.push_back(models::predict(tree, x_.row(static_cast<Eigen::Index>(r))));
  return eval::headline(pred, holdout_gold_, mode_);
}

std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw ConfigError("need at least 2 folds");
  std::vector<std::size_t> fold_of(labels.size(), 0);
  Rng rng(seed);
  std::size_t offset = 0;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] == cls) members.push_back(r);
    }
    if (members.size() < folds) {
      throw ValidationError("class " + to_string(static_cast<Label>(cls)) + " has only " +
                            std::to_string(members.size()) + " rows for " + std::to_string(folds) +
                            " stratified folds; use fewer folds");
    }
    shuffle(members, rng);
    // Continue the round-robin where the previous class stopped so fold
    // sizes stay balanced.
    for (std::size_t i = 0; i < members.size(); ++i) fold_of[members[i]] = (offset + i) % folds;
    offset = (offset + members.size()) % folds;
  }
  return fold_of;
}

std::size_t one_third_threshold(std::size_t folds) { return (folds + 2) / 3; }

std::vector<std::size_t> SelectionReport::selected_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < selected.size(); ++c) {
    if (selected[c]) out.push_back(c);
  }
  return out;
}

std::vector<char> SelectionReport::at_threshold(std::size_t t) const {
  std::vector<char> out(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) out[c] = counts[c] >= t ? 1 : 0;
  return out;
}

SelectionReport select(const features::FeatureMatrix& matrix, const std::vector<Label>& labels,
                       std::size_t folds, MetricMode mode, const GaParams& params) {
  matrix.validate();
  params.validate();
  if (labels.size() != matrix.rows()) throw InputError("labels do not match the matrix rows");
  if (matrix.cols() == 0) throw InputError("feature matrix has no columns");
  std::vector<int> y;
  for (auto l : labels) y.push_back(static_cast<int>(l));
  const auto fold_of = stratified_folds(y, folds, params.seed);
  const models::SortedColumns sorted(matrix.values);

  SelectionReport rep;
  rep.folds = folds;
  rep.threshold = one_third_threshold(folds);
  rep.ga = params;
  rep.fitness_definition = std::string("headline ") + to_string(mode) +
                           " score of a depth-" + std::to_string(params.fitness_max_depth) +
                           " gini tree trained on the fold's training rows minus a stratified " +
                           io::format_double(params.holdout_frac) + " hold-out and scored on that hold-out; ties go to the smaller mask";
  for (const auto& d : matrix.descriptors) rep.feature_ids.push_back(d.id);
  rep.counts.assign(matrix.cols(), 0);

  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < y.size(); ++r) {
      if (fold_of[r] != k) rows.push_back(r);
    }
    const std::uint64_t fold_seed = params.seed * 1000003ULL + k + 1;
    const FoldFitness fitness(matrix.values, sorted, y, rows, mode, params, fold_seed);
    GaParams fold_params = params;
    fold_params.seed = fold_seed;
    const auto res = run_ga(matrix.cols(), [&](const Mask& m) { return fitness(m); }, fold_params);
    for (std::size_t c = 0; c < res.best.size(); ++c) {
      if (res.best[c]) ++rep.counts[c];
    }
    rep.fold_outcomes.push_back(FoldOutcome{res.best, res.best_fitness, res.evaluations});
  }
  rep.selected = rep.at_threshold(rep.threshold);
  return rep;
}

io::OrderedJson report_to_json(const SelectionReport& r) {
  io::OrderedJson j;
  j["folds"] = r.folds;
  j["threshold"] = r.threshold;
  j["ga_params"] = r.ga.to_json();
  j["fitness"] = r.fitness_definition;
  j["features"] = io::OrderedJson::array();
  for (std::size_t c = 0; c < r.feature_ids.size(); ++c) {
    j["features"].push_back({{"id", r.feature_ids[c]}, {"selection_count", r.counts[c]},
                             {"selected", r.selected[c] != 0}});
  }
  j["fold_outcomes"] = io::OrderedJson::array();
  for (const auto& f : r.fold_outcomes) {
    std::string bits;
    for (char b : f.mask) bits.push_back(b ? '1' : '0');
    j["fold_outcomes"].push_back({{"mask", bits}, {"fitness", f.fitness}, {"evaluations", f.evaluations}});
  }
  return j;
}

SelectionReport report_from_json(const io::Json& j) {
  SelectionReport r;
  r.folds = j.at("folds");
  r.threshold = j.at("threshold");
  r.ga = GaParams::from_json(j.at("ga_params"));
  r.fitness_definition = j.value("fitness", "");
  for (const auto& f : j.at("features")) {
    r.feature_ids.push_back(f.at("id"));
    r.counts.push_back(f.at("selection_count"));
    r.selected.push_back(f.at("selected").get<bool>() ? 1 : 0);
  }
  for (const auto& f : j.value("fold_outcomes", io::Json::array())) {
    FoldOutcome o;
    for (char c : f.at("mask").get<std::string>()) o.mask.push_back(c == '1' ? 1 : 0);
    o.fitness = f.at("fitness");
    o.evaluations = f.at("evaluations");
    r.fold_outcomes.push_back(std::move(o));
  }
  return r;
}

}  // namespace nllf::selection
