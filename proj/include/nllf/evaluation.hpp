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

#include <optional>
#include <string>
#include <vector>

#include "nllf/data_model.hpp"
#include "nllf/feature_bank.hpp"
#include "nllf/io.hpp"
#include "nllf/tree.hpp"

namespace nllf::eval {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(const std::vector<Label>& predictions, const std::vector<Label>& golds);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Every value is derived from `confusion`. Undefined ratios are 0 and
/// named in `flags` (e.g. "positive.precision").
struct EvalReport {
  Confusion confusion;
  ClassMetrics positive;
  ClassMetrics negative;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  MetricMode mode = MetricMode::macro;
  double headline = 0.0;  // positive F1 or macro F1 depending on mode
  std::vector<std::string> flags;
  std::size_t abstentions = 0;
};

EvalReport report_from_confusion(const Confusion& c, MetricMode mode);
/// Throws InputError on a length mismatch or empty input.
EvalReport score(const std::vector<Label>& predictions, const std::vector<Label>& golds,
                 MetricMode mode);
/// Headline metric only; used as the selection fitness.
double headline(const std::vector<Label>& predictions, const std::vector<Label>& golds,
                MetricMode mode);

io::OrderedJson report_to_json(const EvalReport& report);
std::string report_to_markdown(const EvalReport& report, const std::string& title);

/// One comparison-table row: model, variant, then P/R/F1 (as percentages)
/// for each task report. The macro triple is used for macro-mode reports.
std::string table_row(const std::string& model, const std::string& variant,
                      const std::vector<EvalReport>& per_task);
std::string table_header(const std::vector<std::string>& task_names);

// ---------------------------------------------------------------------------
// Audit

struct AuditItem {
  std::string id;
  std::optional<Label> expert;  // yes = positive
  Label nllfg = Label::negative;
  Label llm = Label::negative;
};

/// Reads CSV with columns id, expert, nllfg, llm holding yes/no (an empty
/// expert cell marks an unlabeled item).
std::vector<AuditItem> load_audit(const std::string& path);

struct AuditResult {
  std::size_t items = 0;
  std::size_t excluded = 0;  // items without an expert label
  EvalReport nllfg;
  EvalReport llm;
  double nllfg_llm_agreement = 0.0;
  // Naive compounding: the generator's accuracy on its weak-label
  // validation split times the LLM accuracy against the expert.
  std::optional<double> weak_val_accuracy;
  std::optional<double> compounded;
  double observed = 0.0;  // generator accuracy against the expert
};

AuditResult audit_nllfg(const std::vector<AuditItem>& items,
                        std::optional<double> weak_val_accuracy = std::nullopt);
io::OrderedJson audit_to_json(const AuditResult& result);
std::string audit_to_markdown(const AuditResult& result);

// ---------------------------------------------------------------------------
// Explanations

/// Markdown document: example text, node tests in order with readable
/// labels, branch taken and verdict (with a correctness mark when gold is
/// known). Throws InternalError if the path does not belong to the tree.
std::string render_explanation(const models::TreeModel& tree, const Example& example,
                               const models::DecisionPath& path);

/// Re-evaluates each recorded test against the row; false on any mismatch.
bool path_is_faithful(const models::TreeModel& tree, const models::DecisionPath& path,
                      const Eigen::Ref<const Eigen::RowVectorXd>& row);

}  // namespace nllf::eval
