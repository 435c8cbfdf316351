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

#include "nllf/tree.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>

namespace nllf::models {

TreeParams TreeParams::standard() { return TreeParams{}; }

TreeParams TreeParams::bong_only() {
  TreeParams p;
  p.max_depth = 10;
  return p;
}

TreeParams TreeParams::nllf_bong() {
  TreeParams p;
  p.min_impurity_decrease = 1.2e-3;
  return p;
}

void TreeParams::validate() const {
  if (criterion != "gini") throw ConfigError("only the gini criterion is supported, got '" + criterion + "'");
  if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
  if (!(min_impurity_decrease >= 0.0)) throw ConfigError("min_impurity_decrease must be >= 0");
}

io::OrderedJson TreeParams::to_json() const {
  io::OrderedJson j;
  j["criterion"] = criterion;
  j["max_depth"] = max_depth;
  j["min_impurity_decrease"] = min_impurity_decrease;
  j["seed"] = seed;
  return j;
}

TreeParams TreeParams::from_json(const io::Json& j) {
  TreeParams p;
  p.criterion = j.value("criterion", p.criterion);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.min_impurity_decrease = j.value("min_impurity_decrease", p.min_impurity_decrease);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

int TreeModel::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

std::size_t TreeModel::leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

SortedColumns::SortedColumns(const Eigen::MatrixXd& x) {
  order_.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto& o = order_[static_cast<std::size_t>(c)];
    o.resize(static_cast<std::size_t>(x.rows()));
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x(a, c) < x(b, c);
    });
  }
}

namespace {

double gini_of(double a, double b) {
  const double n = a + b;
  if (n <= 0) return 0.0;
  return 1.0 - (a * a + b * b) / (n * n);
}

Label majority(const ClassCounts& c) {
  return c[1] > c[0] ? Label::positive : Label::negative;
}

struct Candidate {
  bool found = false;
  double proxy = std::numeric_limits<double>::infinity();  // n_l*g_l + n_r*g_r
  std::size_t column_pos = 0;
  double threshold = 0.0;
};

}  // namespace

TreeModel fit_tree(const Eigen::MatrixXd& x, const SortedColumns& sorted,
                   const std::vector<int>& labels, const std::vector<char>& in_sample,
                   const std::vector<std::size_t>& columns, const TreeParams& params) {
  params.validate();
  const std::size_t n_rows = static_cast<std::size_t>(x.rows());
  if (labels.size() != n_rows || in_sample.size() != n_rows) {
    throw InputError("labels and sample mask must match the matrix rows");
  }
  TreeModel tree;
  tree.params = params;

  // node_of[r]: open node holding row r, or -1.
  std::vector<int> node_of(n_rows, -1);
  TreeNode root;
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (!in_sample[r]) continue;
    node_of[r] = 0;
    ++root.counts[static_cast<std::size_t>(labels[r])];
  }
  const double total = static_cast<double>(root.counts[0] + root.counts[1]);
  if (total == 0) throw InputError("cannot fit a tree on zero rows");
  tree.nodes.push_back(root);

  std::vector<int> open = {0};
  while (!open.empty()) {
    // Finalize gini and decide which open nodes may split.
    std::vector<int> splittable;
    for (int id : open) {
      auto& n = tree.nodes[static_cast<std::size_t>(id)];
      const double a = static_cast<double>(n.counts[0]);
      const double b = static_cast<double>(n.counts[1]);
      n.gini = gini_of(a, b);
      n.prediction = majority(n.counts);
      if (n.depth < params.max_depth && a + b >= 2 && n.gini > DBL_EPSILON) {
        splittable.push_back(id);
      }
    }
    if (splittable.empty()) break;

    // slot[node id] -> index into per-level arrays.
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t i = 0; i < splittable.size(); ++i) slot[static_cast<std::size_t>(splittable[i])] = static_cast<int>(i);
    std::vector<Candidate> best(splittable.size());

    struct Sweep {
      ClassCounts left{0, 0};
      double last = 0.0;
      bool any = false;
    };
    std::vector<Sweep> sweep(splittable.size());
    for (std::size_t cp = 0; cp < columns.size(); ++cp) {
      const std::size_t col = columns[cp];
      std::fill(sweep.begin(), sweep.end(), Sweep{});
      for (std::uint32_t r : sorted.order(col)) {
        const int node = node_of[r];
        if (node < 0) continue;
        const int s = slot[static_cast<std::size_t>(node)];
        if (s < 0) continue;
        auto& sw = sweep[static_cast<std::size_t>(s)];
        const double v = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col));
        if (sw.any && v > sw.last) {
          const auto& nc = tree.nodes[static_cast<std::size_t>(splittable[static_cast<std::size_t>(s)])].counts;
          const double la = static_cast<double>(sw.left[0]), lb = static_cast<double>(sw.left[1]);
          const double ra = static_cast<double>(nc[0]) - la, rb = static_cast<double>(nc[1]) - lb;
          const double proxy = (la + lb) * gini_of(la, lb) + (ra + rb) * gini_of(ra, rb);
          auto& cand = best[static_cast<std::size_t>(s)];
          if (proxy < cand.proxy - 1e-12) {
            double thr = sw.last / 2.0 + v / 2.0;
            if (thr == v || !std::isfinite(thr)) thr = sw.last;
            cand = Candidate{true, proxy, cp, thr};
          }
        }
        ++sw.left[static_cast<std::size_t>(labels[r])];
        sw.last = v;
        sw.any = true;
      }
    }

    std::vector<int> next_open;
    std::vector<int> split_of(tree.nodes.size(), -1);  // parent id -> left child id
    for (std::size_t i = 0; i < splittable.size(); ++i) {
      const int id = splittable[i];
      const auto& cand = best[i];
      if (!cand.found) continue;
      const auto& n = tree.nodes[static_cast<std::size_t>(id)];
      const double nt = static_cast<double>(n.counts[0] + n.counts[1]);
      const double improvement = (nt / total) * (n.gini - cand.proxy / nt);
      if (improvement + DBL_EPSILON < params.min_impurity_decrease) continue;
      TreeNode left, right;
      left.depth = right.depth = n.depth + 1;
      const int left_id = static_cast<int>(tree.nodes.size());
      auto& parent = tree.nodes[static_cast<std::size_t>(id)];
      parent.feature = static_cast<int>(columns[cand.column_pos]);
      parent.threshold = cand.threshold;
      parent.left = left_id;
      parent.right = left_id + 1;
      tree.nodes.push_back(left);
      tree.nodes.push_back(right);
      split_of.resize(tree.nodes.size(), -1);
      split_of[static_cast<std::size_t>(id)] = left_id;
      next_open.push_back(left_id);
      next_open.push_back(left_id + 1);
    }
    // Route rows of split nodes to their children; rows of nodes that became
    // leaves are retired.
    for (std::size_t r = 0; r < n_rows; ++r) {
      const int node = node_of[r];
      if (node < 0) continue;
      const int left_id = static_cast<std::size_t>(node) < split_of.size() ? split_of[static_cast<std::size_t>(node)] : -1;
      if (left_id < 0) {
        node_of[r] = -1;
        continue;
      }
      const auto& parent = tree.nodes[static_cast<std::size_t>(node)];
      const double v = x(static_cast<Eigen::Index>(r), parent.feature);
      const int child = v <= parent.threshold ? left_id : left_id + 1;
      node_of[r] = child;
      ++tree.nodes[static_cast<std::size_t>(child)].counts[static_cast<std::size_t>(labels[r])];
    }
    open = std::move(next_open);
  }
  return tree;
}

TreeModel train_tree(const features::FeatureMatrix& matrix, const std::vector<Label>& labels,
                     const TreeParams& params) {
  matrix.validate();
  if (labels.size() != matrix.rows()) {
    throw InputError("got " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(matrix.rows()) + " rows");
  }
  std::vector<int> y;
  ClassCounts counts{0, 0};
  for (auto l : labels) {
    y.push_back(static_cast<int>(l));
    ++counts[static_cast<std::size_t>(l)];
  }
  if (counts[0] == 0 || counts[1] == 0) {
    throw ValidationError("tree training needs both classes; got " + std::to_string(counts[1]) +
                          " positive and " + std::to_string(counts[0]) + " negative rows");
  }
  const SortedColumns sorted(matrix.values);
  std::vector<std::size_t> columns(matrix.cols());
  std::iota(columns.begin(), columns.end(), std::size_t{0});
  auto tree = fit_tree(matrix.values, sorted, y, std::vector<char>(matrix.rows(), 1), columns, params);
  tree.features = matrix.descriptors;
  return tree;
}

Label predict(const TreeModel& tree, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int id = 0;
  while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const auto& n = tree.nodes[static_cast<std::size_t>(id)];
    id = row(n.feature) <= n.threshold ? n.left : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(id)].prediction;
}

DecisionPath predict_with_path(const TreeModel& tree,
                               const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (!tree.features.empty() && static_cast<std::size_t>(row.size()) != tree.features.size()) {
    throw InputError("row has " + std::to_string(row.size()) + " features, tree expects " +
                     std::to_string(tree.features.size()));
  }
  DecisionPath path;
  int id = 0;
  while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const auto& n = tree.nodes[static_cast<std::size_t>(id)];
    if (n.feature >= row.size()) throw InputError("row is narrower than the tree's features");
    PathStep s;
    s.node = id;
    s.column = static_cast<std::size_t>(n.feature);
    if (s.column < tree.features.size()) {
      s.feature_id = tree.features[s.column].id;
      s.feature_label = tree.features[s.column].label;
    }
    s.threshold = n.threshold;
    s.value = row(n.feature);
    s.went_left = s.value <= n.threshold;
    s.gini = n.gini;
    s.counts = n.counts;
    path.steps.push_back(s);
    id = s.went_left ? n.left : n.right;
  }
  const auto& leaf = tree.nodes[static_cast<std::size_t>(id)];
  path.leaf = id;
  path.leaf_counts = leaf.counts;
  path.prediction = leaf.prediction;
  return path;
}

std::vector<Label> predict_all(const TreeModel& tree, const Eigen::MatrixXd& x) {
  std::vector<Label> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(predict(tree, x.row(r)));
  return out;
}

io::OrderedJson tree_to_json(const TreeModel& tree) {
  io::OrderedJson j;
  j["format"] = "nllf-tree";
  j["params"] = tree.params.to_json();
  j["features"] = io::OrderedJson::array();
  for (const auto& d : tree.features) {
    j["features"].push_back({{"id", d.id}, {"kind", features::to_string(d.kind)},
                             {"label", d.label}, {"source", d.source}});
  }
  j["nodes"] = io::OrderedJson::array();
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    io::OrderedJson node;
    node["id"] = i;
    node["depth"] = n.depth;
    node["gini"] = n.gini;
    node["counts"] = {{"negative", n.counts[0]}, {"positive", n.counts[1]}};
    node["prediction"] = to_string(n.prediction);
    if (!n.is_leaf()) {
      node["feature"] = static_cast<std::size_t>(n.feature) < tree.features.size()
                            ? tree.features[static_cast<std::size_t>(n.feature)].id
                            : std::to_string(n.feature);
      node["threshold"] = n.threshold;
      node["left"] = n.left;
      node["right"] = n.right;
    }
    j["nodes"].push_back(std::move(node));
  }
  return j;
}

TreeModel tree_from_json(const io::Json& j) {
  if (j.value("format", "") != "nllf-tree") throw ParseError("not a tree model document");
  TreeModel t;
  t.params = TreeParams::from_json(j.at("params"));
  std::map<std::string, int> column;
  for (const auto& d : j.at("features")) {
    column[d.at("id")] = static_cast<int>(t.features.size());
    t.features.push_back({d.at("id"), features::feature_kind_from_string(d.at("kind").get<std::string>()),
                          d.at("label"), d.at("source")});
  }
  for (const auto& nj : j.at("nodes")) {
    TreeNode n;
    n.depth = nj.at("depth");
    n.gini = nj.at("gini");
    n.counts = {nj.at("counts").at("negative").get<std::size_t>(),
                nj.at("counts").at("positive").get<std::size_t>()};
    n.prediction = label_from_string(nj.at("prediction").get<std::string>());
    if (nj.contains("feature")) {
      auto it = column.find(nj["feature"].get<std::string>());
      if (it == column.end()) throw ParseError("tree node references unknown feature " + nj["feature"].dump());
      n.feature = it->second;
      n.threshold = nj.at("threshold");
      n.left = nj.at("left");
      n.right = nj.at("right");
    }
    t.nodes.push_back(n);
  }
  for (const auto& n : t.nodes) {
    if (!n.is_leaf() && (n.left < 0 || n.right < 0 ||
                         static_cast<std::size_t>(std::max(n.left, n.right)) >= t.nodes.size())) {
      throw ParseError("tree node has a dangling child reference");
    }
  }
  return t;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string tree_to_dot(const TreeModel& tree) {
  std::string out = "digraph Tree {\nnode [shape=box, fontname=\"helvetica\"];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    std::string label;
    if (!n.is_leaf()) {
      const std::string name = static_cast<std::size_t>(n.feature) < tree.features.size()
                                   ? tree.features[static_cast<std::size_t>(n.feature)].label
                                   : "x[" + std::to_string(n.feature) + "]";
      label += name + " <= " + io::format_double(n.threshold) + "\n";
    }
    label += "gini = " + io::format_double(std::round(n.gini * 1000.0) / 1000.0) + "\n";
    label += "samples = " + std::to_string(n.counts[0] + n.counts[1]) + "\n";
    label += "value = [" + std::to_string(n.counts[0]) + ", " + std::to_string(n.counts[1]) + "]\n";
    label += "class = " + to_string(n.prediction);
    out += std::to_string(i) + " [label=\"" + dot_escape(label) + "\"];\n";
    if (!n.is_leaf()) {
      out += std::to_string(i) + " -> " + std::to_string(n.left) + " [label=\"True\"];\n";
      out += std::to_string(i) + " -> " + std::to_string(n.right) + " [label=\"False\"];\n";
    }
  }
  out += "}\n";
  return out;
}

bool same_structure(const TreeModel& a, const TreeModel& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& x = a.nodes[i];
    const auto& y = b.nodes[i];
    if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left ||
        x.right != y.right || x.counts != y.counts || x.prediction != y.prediction) {
      return false;
    }
  }
  return true;
}

}  // namespace nllf::models
