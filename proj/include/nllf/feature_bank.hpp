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
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "nllf/bsq.hpp"
#include "nllf/data_model.hpp"
#include "nllf/nllfg.hpp"

namespace nllf::features {

enum class FeatureKind { nllf, ef, bong };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

struct FeatureDescriptor {
  std::string id;
  FeatureKind kind = FeatureKind::nllf;
  std::string label;   // question text, rule label or n-gram
  std::string source;  // question id, rule id or vocabulary index

  friend bool operator==(const FeatureDescriptor&, const FeatureDescriptor&) = default;
};

/// Dense example-by-feature matrix. Rows follow `row_ids`, columns follow
/// `descriptors`.
struct FeatureMatrix {
  std::vector<std::string> row_ids;
  Eigen::MatrixXd values;
  std::vector<FeatureDescriptor> descriptors;

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return descriptors.size(); }

  /// Throws InternalError unless shapes agree and descriptor ids are unique.
  void validate() const;
  std::optional<std::size_t> column_of(const std::string& descriptor_id) const;
  FeatureMatrix select_columns(const std::vector<std::size_t>& columns) const;
  /// Rows in the order of `ids`; throws InputError on an unknown id.
  FeatureMatrix select_rows(const std::vector<std::string>& ids) const;
};

/// Column-concatenates matrices built on the same example ordering.
FeatureMatrix assemble(const std::vector<FeatureMatrix>& parts);

/// CSV with header example_id + descriptor ids, plus a descriptors JSON
/// sidecar at `<path>.descriptors.json`. Values round-trip exactly.
void save_matrix(const std::string& path, const FeatureMatrix& matrix);
FeatureMatrix load_matrix(const std::string& path);

// ---------------------------------------------------------------------------
// NLLF

/// Scores keyed by (model hash, example id, question id). Optionally
/// persisted as JSON-Lines.
class NllfCache {
 public:
  explicit NllfCache(std::string path = {});

  std::optional<nllfg::Scores> get(const std::string& model_hash,
                                   const std::string& example_id,
                                   const std::string& bsq_id) const;
  void put(const std::string& model_hash, const std::string& example_id,
           const std::string& bsq_id, const nllfg::Scores& scores);
  /// Appends entries added since the last flush to the backing file.
  void flush();

  std::size_t scoring_calls() const { return scoring_calls_; }
  void count_call() { ++scoring_calls_; }
  std::size_t size() const { return entries_.size(); }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  std::string path_;
  std::map<Key, nllfg::Scores> entries_;
  std::vector<Key> pending_;
  std::size_t scoring_calls_ = 0;
};

/// 2 * |active questions| columns laid out (yes_i, no_i) in question order.
FeatureMatrix build_nllf(const nllfg::Model& model, const Corpus& examples,
                         const bsq::BsqSet& questions, NllfCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Expert features

enum class RuleKind { keyword, prefix, regex, statistic, lexicon, equals, overlap };
enum class RuleOutput { boolean, count, ratio };

/// One declarative rule. Which members are read depends on `kind`:
/// keyword/prefix/regex use `pattern`, statistic uses `statistic` (and
/// `pattern` for letter_frequency), lexicon/equals use `words`, overlap
/// compares `field` with `other_field` (restricted to `words` if given).
struct ExpertRule {
  std::string id;
  std::string category;
  std::string label;
  RuleKind kind = RuleKind::keyword;
  RuleOutput output = RuleOutput::boolean;
  std::string pattern;
  std::string statistic;
  std::vector<std::string> words;
  std::optional<std::string> field;  // default: the whole premise
  std::optional<std::string> other_field;

  std::optional<std::regex> compiled;  // regex kind only
};

struct RuleRegistry {
  std::string task;
  std::vector<ExpertRule> rules;
};

/// Validates every rule up front; a malformed rule throws ConfigError.
RuleRegistry parse_registry(const io::Json& j);
RuleRegistry load_registry(const std::string& path);

/// Names accepted by the statistic kind.
const std::vector<std::string>& statistic_names();

/// Value of one statistic on `text`. Ratios over empty text are 0.
double text_statistic(const std::string& name, const std::string& text,
                      const std::string& argument = {});

double evaluate_rule(const ExpertRule& rule, const Example& example);

FeatureMatrix build_ef(const RuleRegistry& registry, const Corpus& examples);

// ---------------------------------------------------------------------------
// Bag of n-grams

struct BongParams {
  std::size_t max_features = 1000;
  std::size_t ngram_min = 1;
  std::size_t ngram_max = 2;
};

/// Lowercased tokens of two or more word characters.
std::vector<std::string> bong_tokens(const std::string& text);

/// Vocabulary and idf weights fit on training text only.
struct BongVocabulary {
  BongParams params;
  std::vector<std::string> terms;  // alphabetical; column order
  std::vector<double> idf;
  std::map<std::string, std::size_t> index;

  std::vector<std::string> ngrams(const std::string& text) const;
  /// L2-normalized tf-idf row; unseen n-grams are ignored.
  Eigen::RowVectorXd transform(const std::string& text) const;
};

/// Keeps the max_features most frequent n-grams (ties alphabetical) and
/// uses smoothed idf ln((1 + n) / (1 + df)) + 1.
BongVocabulary fit_bong(const std::vector<std::string>& train_texts,
                        const BongParams& params);
FeatureMatrix build_bong(const BongVocabulary& vocabulary, const Corpus& examples);

io::OrderedJson bong_to_json(const BongVocabulary& vocabulary);
BongVocabulary bong_from_json(const io::Json& j);

}  // namespace nllf::features
