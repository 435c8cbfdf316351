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

#include "nllf/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace nllf::eval {

Confusion confusion(const std::vector<Label>& predictions, const std::vector<Label>& golds) {
  if (predictions.size() != golds.size()) {
    throw InputError("got " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(golds.size()) + " gold labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const bool p = predictions[i] == Label::positive;
    const bool g = golds[i] == Label::positive;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

double safe_div(double num, double den, const std::string& name, std::vector<std::string>& flags) {
  if (den == 0) {
    flags.push_back(name);
    return 0.0;
  }
  return num / den;
}

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn, const std::string& name,
                           std::vector<std::string>& flags) {
  ClassMetrics m;
  m.support = tp + fn;
  m.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp), name + ".precision", flags);
  m.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn), name + ".recall", flags);
  m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall, name + ".f1", flags);
  return m;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

EvalReport report_from_confusion(const Confusion& c, MetricMode mode) {
  EvalReport r;
  r.confusion = c;
  r.mode = mode;
  r.positive = class_metrics(c.tp, c.fp, c.fn, "positive", r.flags);
  r.negative = class_metrics(c.tn, c.fn, c.fp, "negative", r.flags);
  r.accuracy = safe_div(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()), "accuracy", r.flags);
  r.macro_precision = (r.positive.precision + r.negative.precision) / 2.0;
  r.macro_recall = (r.positive.recall + r.negative.recall) / 2.0;
  r.macro_f1 = (r.positive.f1 + r.negative.f1) / 2.0;
  r.headline = mode == MetricMode::positive_class ? r.positive.f1 : r.macro_f1;
  return r;
}

EvalReport score(const std::vector<Label>& predictions, const std::vector<Label>& golds,
                 MetricMode mode) {
  if (golds.empty()) throw InputError("cannot score an empty prediction set");
  return report_from_confusion(confusion(predictions, golds), mode);
}

double headline(const std::vector<Label>& predictions, const std::vector<Label>& golds,
                MetricMode mode) {
  return report_from_confusion(confusion(predictions, golds), mode).headline;
}

io::OrderedJson report_to_json(const EvalReport& r) {
  auto cls = [](const ClassMetrics& m) {
    return io::OrderedJson{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  };
  io::OrderedJson j;
  j["mode"] = to_string(r.mode);
  j["headline"] = r.headline;
  j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
  j["positive"] = cls(r.positive);
  j["negative"] = cls(r.negative);
  j["accuracy"] = r.accuracy;
  j["macro"] = {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}};
  j["flags"] = r.flags;
  j["abstentions"] = r.abstentions;
  return j;
}

std::string report_to_markdown(const EvalReport& r, const std::string& title) {
  std::string out = "### " + title + "\n\n";
  out += "| Class | Precision | Recall | F1 | Support |\n|---|---|---|---|---|\n";
  out += "| positive | " + pct(r.positive.precision) + " | " + pct(r.positive.recall) + " | " +
         pct(r.positive.f1) + " | " + std::to_string(r.positive.support) + " |\n";
  out += "| negative | " + pct(r.negative.precision) + " | " + pct(r.negative.recall) + " | " +
         pct(r.negative.f1) + " | " + std::to_string(r.negative.support) + " |\n";
  out += "| macro | " + pct(r.macro_precision) + " | " + pct(r.macro_recall) + " | " + pct(r.macro_f1) +
         " | " + std::to_string(r.confusion.total()) + " |\n\n";
  out += "Accuracy " + pct(r.accuracy) + ". Headline (" + to_string(r.mode) + ") " + pct(r.headline) + ".\n";
  if (!r.flags.empty()) out += "Undefined ratios set to 0: " + join(r.flags, ", ") + ".\n";
  if (r.abstentions) out += "Abstentions scored as the majority class: " + std::to_string(r.abstentions) + ".\n";
  return out;
}

std::string table_header(const std::vector<std::string>& task_names) {
  std::string head = "| Model | Variant |";
  std::string rule = "|---|---|";
  for (const auto& t : task_names) {
    head += " " + t + " P | " + t + " R | " + t + " F1 |";
    rule += "---|---|---|";
  }
  return head + "\n" + rule + "\n";
}

std::string table_row(const std::string& model, const std::string& variant,
                      const std::vector<EvalReport>& per_task) {
  std::string out = "| " + model + " | " + variant + " |";
  for (const auto& r : per_task) {
    if (r.mode == MetricMode::positive_class) {
      out += " " + pct(r.positive.precision) + " | " + pct(r.positive.recall) + " | " + pct(r.positive.f1) + " |";
    } else {
      out += " " + pct(r.macro_precision) + " | " + pct(r.macro_recall) + " | " + pct(r.macro_f1) + " |";
    }
  }
  return out + "\n";
}

// ---------------------------------------------------------------------------
// Audit

namespace {

std::optional<Label> verdict(const std::string& cell, const std::string& where) {
  const std::string v = casefold(cell);
  if (v.empty()) return std::nullopt;
  if (v == "yes" || v == "1" || v == "positive" || v == "sí" || v == "si") return Label::positive;
  if (v == "no" || v == "0" || v == "negative") return Label::negative;
  throw ParseError(where + ": unrecognized verdict '" + cell + "'");
}

}  // namespace

std::vector<AuditItem> load_audit(const std::string& path) {
  const auto rows = io::parse_csv(read_file(path));
  if (rows.empty()) throw ParseError(path + ": empty audit file");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[trim(rows[0][i])] = i;
  for (const char* need : {"id", "expert", "nllfg", "llm"}) {
    if (!col.count(need)) throw ParseError(path + ": missing column '" + need + "'");
  }
  std::vector<AuditItem> items;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    const std::string where = path + ":" + std::to_string(r + 1);
    auto cell = [&](const char* name) -> std::string {
      const std::size_t i = col.at(name);
      return i < row.size() ? row[i] : std::string{};
    };
    AuditItem item;
    item.id = cell("id");
    item.expert = verdict(cell("expert"), where);
    const auto n = verdict(cell("nllfg"), where);
    const auto l = verdict(cell("llm"), where);
    if (!n || !l) throw ValidationError(where + ": generator and LLM verdicts are required");
    item.nllfg = *n;
    item.llm = *l;
    items.push_back(std::move(item));
  }
  return items;
}

AuditResult audit_nllfg(const std::vector<AuditItem>& items, std::optional<double> weak_val_accuracy) {
  AuditResult res;
  std::vector<Label> expert, nllfg, llm;
  std::size_t agree = 0;
  for (const auto& it : items) {
    if (!it.expert) {
      ++res.excluded;
      continue;
    }
    expert.push_back(*it.expert);
    nllfg.push_back(it.nllfg);
    llm.push_back(it.llm);
    if (it.nllfg == it.llm) ++agree;
  }
  res.items = expert.size();
  if (expert.empty()) throw ValidationError("no audit item carries an expert label");
  // Per-class reports are symmetric; the yes class is the positive one.
  res.nllfg = score(nllfg, expert, MetricMode::macro);
  res.llm = score(llm, expert, MetricMode::macro);
  res.nllfg_llm_agreement = static_cast<double>(agree) / static_cast<double>(res.items);
  res.observed = res.nllfg.accuracy;
  res.weak_val_accuracy = weak_val_accuracy;
  if (weak_val_accuracy) res.compounded = *weak_val_accuracy * res.llm.accuracy;
  return res;
}

io::OrderedJson audit_to_json(const AuditResult& r) {
  io::OrderedJson j;
  j["items"] = r.items;
  j["excluded_without_expert_label"] = r.excluded;
  j["nllfg"] = report_to_json(r.nllfg);
  j["llm"] = report_to_json(r.llm);
  j["nllfg_llm_agreement"] = r.nllfg_llm_agreement;
  j["observed_nllfg_accuracy"] = r.observed;
  if (r.weak_val_accuracy) j["weak_val_accuracy"] = *r.weak_val_accuracy;
  if (r.compounded) j["compounded_accuracy"] = *r.compounded;
  return j;
}

std::string audit_to_markdown(const AuditResult& r) {
  std::string out = "## Generator audit against expert labels\n\n";
  out += std::to_string(r.items) + " items scored, " + std::to_string(r.excluded) +
         " excluded for lacking an expert label.\n\n";
  out += "| System | Label | Prec. | Rec. | F1 | Acc. |\n|---|---|---|---|---|---|\n";
  auto rows = [&](const std::string& name, const EvalReport& e) {
    out += "| " + name + " | Yes | " + pct(e.positive.precision) + " | " + pct(e.positive.recall) + " | " +
           pct(e.positive.f1) + " | " + pct(e.accuracy) + " |\n";
    out += "| " + name + " | No | " + pct(e.negative.precision) + " | " + pct(e.negative.recall) + " | " +
           pct(e.negative.f1) + " | |\n";
  };
  rows("LLM", r.llm);
  rows("NLLFG", r.nllfg);
  out += "\nGenerator/LLM agreement: " + pct(r.nllfg_llm_agreement) + ".\n";
  if (r.compounded) {
    out += "Naive compounding " + fixed(*r.weak_val_accuracy, 2) + " x " + fixed(r.llm.accuracy, 2) + " = " +
           fixed(*r.compounded, 3) + "; observed generator accuracy " + fixed(r.observed, 2) + ".\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Explanations

std::string render_explanation(const models::TreeModel& tree, const Example& example,
                               const models::DecisionPath& path) {
  std::string out = "## Example " + example.id + "\n\n";
  for (const auto& [name, text] : example.fields) out += "> **" + name + "**: " + text + "\n>\n";
  out += "\n";
  if (path.steps.empty()) out += "Single-leaf tree: no tests.\n\n";
  int expected = 0;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const auto& s = path.steps[i];
    if (s.node != expected || static_cast<std::size_t>(s.node) >= tree.nodes.size()) {
      throw InternalError("decision path does not follow the tree at step " + std::to_string(i + 1));
    }
    const auto& node = tree.nodes[static_cast<std::size_t>(s.node)];
    if (node.is_leaf() || static_cast<std::size_t>(node.feature) != s.column || node.threshold != s.threshold) {
      throw InternalError("decision path does not match tree node " + std::to_string(s.node));
    }
    std::string label = s.feature_label;
    if (s.column < tree.features.size()) {
      const auto& d = tree.features[s.column];
      label = d.label;
      if (d.kind == features::FeatureKind::nllf) {
        const bool yes_col = d.id.size() >= 4 && d.id.compare(d.id.size() - 4, 4, ":yes") == 0;
        label = "\"" + d.label + "\" (" + (yes_col ? "yes" : "no") + " score)";
      }
    }
    out += std::to_string(i + 1) + ". " + label + " = " + io::format_double(s.value) + " " +
           (s.went_left ? "<=" : ">") + " " + io::format_double(s.threshold) + " (node gini " +
           fixed(s.gini, 3) + ", negative/positive " + std::to_string(s.counts[0]) + "/" +
           std::to_string(s.counts[1]) + ")\n";
    expected = s.went_left ? node.left : node.right;
  }
  if (path.leaf != expected) throw InternalError("decision path ends at the wrong leaf");
  out += "\n**Verdict: " + to_string(path.prediction) + "** (leaf negative/positive " +
         std::to_string(path.leaf_counts[0]) + "/" + std::to_string(path.leaf_counts[1]) + ")";
  if (example.gold) out += *example.gold == path.prediction ? " [correct]" : " [incorrect]";
  out += "\n";
  return out;
}

bool path_is_faithful(const models::TreeModel& tree, const models::DecisionPath& path,
                      const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int id = 0;
  for (const auto& s : path.steps) {
    if (s.node != id) return false;
    const auto& n = tree.nodes[static_cast<std::size_t>(id)];
    const bool left = row(n.feature) <= n.threshold;
    if (left != s.went_left) return false;
    id = left ? n.left : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(id)].is_leaf() &&
         tree.nodes[static_cast<std::size_t>(id)].prediction == path.prediction;
}

}  // namespace nllf::eval
