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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Criterion numbers may be passed as
// arguments to run a subset.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nllf/common.hpp"
#include "nllf/data_model.hpp"
#include "nllf/evaluation.hpp"
#include "nllf/feature_bank.hpp"
#include "nllf/feature_selection.hpp"
#include "nllf/models.hpp"
#include "nllf/nllfg.hpp"
#include "nllf/pipeline.hpp"
#include "nllf/synthetic.hpp"
#include "nllf/tree.hpp"

namespace fs = std::filesystem;
using namespace nllf;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(const std::string& text) { notes.push_back(text); }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

fs::path work_root() {
  static const fs::path root = [] {
    fs::path p = fs::current_path() / "acceptance_work";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

// ---------------------------------------------------------------------------

Outcome configuration_fidelity() {
  Outcome o;
  const nllfg::Hyper g;
  o.check(g.epochs == 7 && g.batch_size == 16 && g.learning_rate == 8e-5, "generator 7/16/8e-5");

  const auto ev = models::EncoderHyper::vanilla();
  const auto ea = models::EncoderHyper::augmented();
  o.check(ev.epochs == 8 && ev.batch_size == 32 && ev.learning_rate == 1e-5, "encoder 8/32/1e-5");
  o.check(ea.epochs == 8 && ea.batch_size == 32 && ea.learning_rate == 5e-6, "augmented encoder lr 5e-6");

  const auto ts = models::TreeParams::standard();
  const auto tb = models::TreeParams::bong_only();
  const auto tn = models::TreeParams::nllf_bong();
  o.check(ts.max_depth == 5 && ts.min_impurity_decrease == 0.0, "tree depth 5");
  o.check(tb.max_depth == 10, "n-gram tree depth 10");
  o.check(tn.max_depth == 5 && tn.min_impurity_decrease == 1.2e-3, "NLLF+n-gram min_impurity_decrease");
  o.check(features::BongParams{}.max_features == 1000, "n-gram max_features 1000");

  o.check(selection::SelectionReport{}.folds == 15, "15 folds");
  o.check(selection::one_third_threshold(15) == 5, "threshold 5");

  auto task_ok = [&](const TaskConfig& t, double pq, std::size_t c, std::size_t cp, const std::string& name) {
    o.check(t.p_q == pq && t.p_l == 0.10 && t.curated_count == c && t.augmented_count == cp,
            name + " p_q/p_l/C/C+");
  };
  task_ok(TaskConfig::abstract_screening(), 0.013, 13, 109, "SAC preset");
  task_ok(TaskConfig::incoherence_detection(), 0.0015, 10, 66, "IAD preset");

  // The shipped task configs resolve to the same constants.
  for (const std::string name : {"sac", "iad"}) {
    const auto cfg = pipeline::RunConfig::load(std::string(NLLF_SOURCE_DIR) + "/data/tasks/" + name +
                                               "/config.json");
    if (name == "sac") task_ok(cfg.task(), 0.013, 13, 109, "sac/config.json");
    else task_ok(cfg.task(), 0.0015, 10, 66, "iad/config.json");
    const auto h = nllfg::Hyper::from_json(cfg.section("nllfg"));
    o.check(h.epochs == 7 && h.batch_size == 16 && h.learning_rate == 8e-5, name + " generator section");
    o.check(cfg.section("selection").value("folds", 0) == 15, name + " selection folds");
    o.check(cfg.section("features").value("bong", io::Json::object()).value("max_features", 0) == 1000,
            name + " n-gram cap");
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome nllf_dimensionality() {
  Outcome o;
  Rng rng(7);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double a = 20.0 * (uniform_unit(rng) - 0.5);
    const double b = 20.0 * (uniform_unit(rng) - 0.5);
    const auto s = nllfg::scores_from_logits(a, b);
    worst = std::max({worst, std::abs(s.yes - 1.0 / (1.0 + std::exp(-a))),
                      std::abs(s.no - 1.0 / (1.0 + std::exp(-b)))});
  }

  Corpus examples;
  for (int i = 0; i < 3; ++i) {
    Example e;
    e.id = "e" + std::to_string(i);
    e.fields = {{"text", "sample passage number " + std::to_string(i) + " about soil and water"}};
    examples.push_back(e);
  }
  nllfg::Hyper hyper;
  hyper.backbone_id = "tiny";
  hyper.seed = 3;

  for (std::size_t cplus : {std::size_t{1}, std::size_t{66}, std::size_t{109}}) {
    bsq::BsqSet questions;
    std::vector<std::string> vocab{examples[0].premise()};
    for (std::size_t q = 0; q < cplus; ++q) {
      bsq::Bsq b;
      b.id = "q" + std::to_string(q);
      b.text = "Does the text discuss topic " + std::to_string(q) + "?";
      questions.push_back(b);
      vocab.push_back(b.text);
    }
    const auto model = nllfg::untrained(vocab, hyper);
    const auto m = features::build_nllf(model, examples, questions);
    o.check(m.cols() == 2 * cplus && static_cast<std::size_t>(m.values.cols()) == 2 * cplus,
            "width 2*" + std::to_string(cplus));
    o.check((m.values.array() > 0.0).all() && (m.values.array() < 1.0).all(),
            "entries in (0,1) for C+=" + std::to_string(cplus));
    for (std::size_t r = 0; r < examples.size(); ++r) {
      for (std::size_t q = 0; q < cplus; ++q) {
        const auto [yl, nl] = nllfg::logits(model, examples[r].premise(), questions[q].text);
        worst = std::max({worst, std::abs(m.values(r, 2 * q) - 1.0 / (1.0 + std::exp(-yl))),
                          std::abs(m.values(r, 2 * q + 1) - 1.0 / (1.0 + std::exp(-nl)))});
      }
    }
  }
  o.check(worst <= 1e-6, "sigmoid closed form (max error " + std::to_string(worst) + ")");
  o.note("max sigmoid error " + std::to_string(worst));
  return o;
}

// ---------------------------------------------------------------------------
// Synthetic workspace shared by criteria 3 and 7.

struct SyntheticRun {
  bool ready = false;
  fs::path workspace;
  fs::path out;
  double headline = 0.0;
  std::size_t llm_calls = 0;
};

SyntheticRun& synthetic_run() {
  static SyntheticRun run;
  if (run.ready) return run;
  run.workspace = work_root() / "synthetic";
  run.out = run.workspace / "run";
  synthetic::write_workspace(run.workspace.string(), synthetic::Spec{});
  pipeline::Runner runner(pipeline::RunConfig::load((run.workspace / "config.json").string()),
                          run.out.string());
  runner.run_all(pipeline::default_run_stages());
  run.llm_calls = runner.llm_stats().backend_calls;
  const auto eval = io::Json::parse(read_file((run.out / "reports/eval.json").string()));
  run.headline = eval.at("models").at("tree").at("headline").get<double>();
  run.ready = true;
  return run;
}

// Each signal keyword needs at least one selected column whose question
// mentions it.
bool signals_recovered(const features::FeatureMatrix& m, const std::vector<char>& selected) {
  for (const auto& kw : synthetic::signal_keywords()) {
    bool found = false;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (selected[c] && synthetic::mentions(m.descriptors[c].label, kw)) found = true;
    }
    if (!found) return false;
  }
  return true;
}

Outcome synthetic_end_to_end() {
  Outcome o;
  auto& run = synthetic_run();
  o.check(run.headline >= 0.90, "held-out headline F1 >= 0.90 (got " + fmt(run.headline) + ")");
  o.note("headline F1 " + fmt(run.headline) + ", " + std::to_string(run.llm_calls) + " LLM calls");

  const auto train = features::load_matrix((run.out / "features/train.csv").string());
  std::map<std::string, Label> gold;
  for (const auto& e : load_corpus((run.out / "corpus.jsonl").string())) gold[e.id] = *e.gold;
  std::vector<Label> labels;
  for (const auto& id : train.row_ids) labels.push_back(gold.at(id));

  std::size_t recovered = 0;
  const std::size_t seeds = 10;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    selection::GaParams ga;
    ga.seed = seed;
    const auto report = selection::select(train, labels, 15, MetricMode::macro, ga);
    if (signals_recovered(train, report.selected)) ++recovered;
  }
  o.check(recovered * 10 >= seeds * 9, "signal pairs recovered in >= 90% of seeded runs");
  o.note("signals recovered in " + std::to_string(recovered) + "/" + std::to_string(seeds) + " GA seeds");
  return o;
}

// ---------------------------------------------------------------------------

Outcome ga_vs_brute_force() {
  Outcome o;
  const std::size_t n = 10;
  const std::size_t rows = 160;
  double worst_ratio = 1.0;
  const std::size_t seeds = 25;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    Rng rng(1000 + seed);
    Eigen::MatrixXd x(rows, n);
    std::vector<int> labels(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < n; ++c) x(r, c) = uniform_unit(rng);
      // Two informative columns that vary per instance, plus label noise.
      const std::size_t a = seed % n;
      const std::size_t b = (seed * 3 + 1) % n;
      bool y = x(r, a) + 0.5 * x(r, b) > 0.8;
      if (uniform_unit(rng) < 0.1) y = !y;
      labels[r] = y ? 1 : 0;
    }
    const models::SortedColumns sorted(x);
    std::vector<std::size_t> all(rows);
    for (std::size_t r = 0; r < rows; ++r) all[r] = r;
    selection::GaParams params;
    params.seed = seed;
    const selection::FoldFitness fitness(x, sorted, labels, all, MetricMode::macro, params, seed);

    double optimum = 0.0;
    for (std::size_t bits = 1; bits < (std::size_t{1} << n); ++bits) {
      selection::Mask mask(n, 0);
      for (std::size_t c = 0; c < n; ++c) mask[c] = (bits >> c) & 1U;
      optimum = std::max(optimum, fitness(mask));
    }
    const auto ga = selection::run_ga(n, std::cref(fitness), params);
    const double ratio = optimum > 0 ? ga.best_fitness / optimum : 1.0;
    worst_ratio = std::min(worst_ratio, ratio);
  }
  o.check(worst_ratio >= 0.98, "GA within 2% of exhaustive optimum (worst ratio " + fmt(worst_ratio) + ")");
  o.note(std::to_string(seeds) + " seeds, worst GA/optimum ratio " + fmt(worst_ratio));
  return o;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  Outcome o;
  Rng rng(11);
  double worst = 0.0;
  auto ratio = [](long double num, long double den) { return den == 0 ? 0.0L : num / den; };
  for (int k = 0; k < 25; ++k) {
    eval::Confusion c;
    c.tp = uniform_index(rng, 400);
    c.fp = uniform_index(rng, 400);
    c.tn = uniform_index(rng, 400);
    c.fn = uniform_index(rng, 400) + 1;
    // Through label vectors, so the confusion count is exercised too.
    std::vector<Label> pred;
    std::vector<Label> gold;
    auto push = [&](std::size_t count, Label p, Label g) {
      for (std::size_t i = 0; i < count; ++i) {
        pred.push_back(p);
        gold.push_back(g);
      }
    };
    push(c.tp, Label::positive, Label::positive);
    push(c.fp, Label::positive, Label::negative);
    push(c.tn, Label::negative, Label::negative);
    push(c.fn, Label::negative, Label::positive);
    const auto rep = eval::score(pred, gold, MetricMode::macro);
    o.check(rep.confusion == c, "confusion counts");

    const long double tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
    const long double pp = ratio(tp, tp + fp), pr = ratio(tp, tp + fn), pf = ratio(2 * tp, 2 * tp + fp + fn);
    const long double np = ratio(tn, tn + fn), nr = ratio(tn, tn + fp), nf = ratio(2 * tn, 2 * tn + fn + fp);
    const long double expected[] = {pp, pr, pf, np, nr, nf, (pp + np) / 2, (pr + nr) / 2, (pf + nf) / 2,
                                    (tp + tn) / (tp + tn + fp + fn)};
    const double got[] = {rep.positive.precision, rep.positive.recall, rep.positive.f1,
                          rep.negative.precision, rep.negative.recall, rep.negative.f1,
                          rep.macro_precision,    rep.macro_recall,    rep.macro_f1,
                          rep.accuracy};
    for (int i = 0; i < 10; ++i) {
      worst = std::max(worst, static_cast<double>(std::fabs(static_cast<long double>(got[i]) - expected[i])));
    }
  }
  o.check(worst <= 1e-12, "hand-derived metrics (max error " + std::to_string(worst) + ")");

  // Asymmetric fixture: 85 tp, 15 fp, 15 fn, 885 tn.
  const eval::Confusion asym{85, 15, 885, 15};
  const auto pos = eval::report_from_confusion(asym, MetricMode::positive_class);
  const auto mac = eval::report_from_confusion(asym, MetricMode::macro);
  o.check(std::abs(pos.headline - 0.85) <= 1e-12, "positive-class headline 0.85");
  o.check(std::abs(mac.headline - (0.85 + 885.0 / 900.0) / 2) <= 1e-12, "macro headline 0.9167");
  o.check(pos.headline < mac.headline - 0.05, "modes separate");
  o.note("max error " + std::to_string(worst) + "; asymmetric headline " + fmt(pos.headline) + " vs " +
         fmt(mac.headline));
  return o;
}

// ---------------------------------------------------------------------------

Outcome tree_determinism() {
  Outcome o;
  Rng rng(5);
  const std::size_t rows = 400;
  const std::size_t cols = 8;
  features::FeatureMatrix m;
  m.values.resize(rows, cols);
  std::vector<Label> labels;
  for (std::size_t c = 0; c < cols; ++c) m.descriptors.push_back({"f" + std::to_string(c), features::FeatureKind::ef, "feature " + std::to_string(c), ""});
  for (std::size_t r = 0; r < rows; ++r) {
    m.row_ids.push_back("r" + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) m.values(r, c) = std::round(uniform_unit(rng) * 20) / 20;
    bool y = m.values(r, 0) > 0.4 && (m.values(r, 3) < 0.6 || m.values(r, 5) > 0.7);
    if (uniform_unit(rng) < 0.08) y = !y;
    labels.push_back(y ? Label::positive : Label::negative);
  }

  models::TreeModel first;
  std::string first_json;
  std::size_t replayed = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto params = models::TreeParams::standard();
    params.seed = seed;
    const auto tree = models::train_tree(m, labels, params);
    const std::string json = models::tree_to_json(tree).dump();
    if (seed == 0) {
      first = tree;
      first_json = json;
    } else {
      o.check(models::same_structure(first, tree), "same structure for seed " + std::to_string(seed));
      o.check(json.substr(json.find("\"nodes\"")) == first_json.substr(first_json.find("\"nodes\"")),
              "same nodes JSON for seed " + std::to_string(seed));
    }
    Rng rows_rng(100 + seed);
    for (int k = 0; k < 1000; ++k) {
      Eigen::RowVectorXd row(cols);
      for (std::size_t c = 0; c < cols; ++c) row(c) = uniform_unit(rows_rng);
      const auto path = models::predict_with_path(tree, row);
      const bool ok = path.prediction == models::predict(tree, row) && eval::path_is_faithful(tree, path, row);
      if (ok) ++replayed;
      else o.check(false, "path replay for seed " + std::to_string(seed));
    }
  }
  o.note("50 trees identical; " + std::to_string(replayed) + "/50000 paths replayed; depth " +
         std::to_string(first.depth()) + ", " + std::to_string(first.leaves()) + " leaves");
  return o;
}

// ---------------------------------------------------------------------------

bool same_bytes(const fs::path& a, const fs::path& b) { return read_file(a.string()) == read_file(b.string()); }

Outcome cache_reproducibility() {
  Outcome o;
  auto& first = synthetic_run();
  const fs::path again = first.workspace / "rerun";
  fs::remove_all(again);
  pipeline::Runner runner(pipeline::RunConfig::load((first.workspace / "config.json").string()), again.string());
  runner.run_all(pipeline::default_run_stages());
  const auto stats = runner.llm_stats();
  o.check(stats.backend_calls == 0, "0 backend calls (got " + std::to_string(stats.backend_calls) + ")");
  o.check(stats.cache_hits == first.llm_calls, "every request served from cache");
  for (const char* rel : {"features/train.csv", "features/val.csv", "features/test.csv", "selection/report.json",
                          "selection/train.csv", "models/tree.json"}) {
    o.check(same_bytes(first.out / rel, again / rel), std::string("bit-identical ") + rel);
  }
  o.note(std::to_string(stats.cache_hits) + " cache hits, 0 backend calls expected, " +
         std::to_string(stats.backend_calls) + " issued");
  return o;
}

// ---------------------------------------------------------------------------

Outcome audit_arithmetic() {
  Outcome o;
  const auto items = eval::load_audit(std::string(NLLF_SOURCE_DIR) + "/tests/fixtures/audit_table3.csv");
  const auto res = eval::audit_nllfg(items, 0.70);
  auto pct = [](double v) { return static_cast<int>(std::lround(100 * v)); };
  o.check(res.items == 100 && res.excluded == 0, "100 expert-labelled items");
  o.check(pct(res.llm.accuracy) == 78, "LLM accuracy 78");
  o.check(pct(res.nllfg.accuracy) == 68, "generator accuracy 68");
  o.check(res.compounded && std::abs(*res.compounded - 0.546) <= 1e-12, "compounded 0.70 x 0.78 = 0.546");
  o.check(std::abs(res.observed - 0.68) <= 1e-12, "observed 0.68 exceeds naive compounding");
  // Per-class cells, yes then no: P, R, F1.
  const int llm_cells[] = {71, 89, 79, 88, 68, 77};
  const int gen_cells[] = {60, 96, 74, 92, 43, 59};
  for (int side = 0; side < 2; ++side) {
    const auto& r = side == 0 ? res.llm : res.nllfg;
    const int* want = side == 0 ? llm_cells : gen_cells;
    const int got[] = {pct(r.positive.precision), pct(r.positive.recall), pct(r.positive.f1),
                       pct(r.negative.precision), pct(r.negative.recall), pct(r.negative.f1)};
    for (int i = 0; i < 6; ++i) o.check(got[i] == want[i], std::string(side ? "generator" : "LLM") + " cell " + std::to_string(i));
  }
  o.note("LLM " + fmt(res.llm.accuracy, 2) + ", generator " + fmt(res.nllfg.accuracy, 2) + ", compounded " +
         fmt(*res.compounded, 3));
  return o;
}

struct Criterion {
  int number;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  set_warning_handler([](const std::string&) {});
  const std::vector<Criterion> criteria{
      {1, "configuration fidelity", configuration_fidelity},
      {2, "NLLF dimensionality", nllf_dimensionality},
      {3, "synthetic end-to-end", synthetic_end_to_end},
      {4, "GA vs brute force", ga_vs_brute_force},
      {5, "metric oracle", metric_oracle},
      {6, "tree determinism and faithfulness", tree_determinism},
      {7, "cache reproducibility", cache_reproducibility},
      {8, "audit arithmetic", audit_arithmetic},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.notes.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.name << ") ["
              << fmt(secs, 1) << " s]";
    for (const auto& n : out.notes) std::cout << "; " << n;
    std::cout << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
