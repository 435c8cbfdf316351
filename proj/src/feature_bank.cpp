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

#include "nllf/feature_bank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <unordered_map>

namespace nllf::features {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::nllf: return "nllf";
    case FeatureKind::ef: return "ef";
    case FeatureKind::bong: return "bong";
  }
  return "nllf";
}

FeatureKind feature_kind_from_string(std::string_view text) {
  if (text == "nllf") return FeatureKind::nllf;
  if (text == "ef") return FeatureKind::ef;
  if (text == "bong") return FeatureKind::bong;
  throw ConfigError("unknown feature kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// FeatureMatrix

void FeatureMatrix::validate() const {
  if (static_cast<std::size_t>(values.rows()) != row_ids.size() ||
      static_cast<std::size_t>(values.cols()) != descriptors.size()) {
    throw InternalError("feature matrix is " + std::to_string(values.rows()) + "x" +
                        std::to_string(values.cols()) + " but has " +
                        std::to_string(row_ids.size()) + " row ids and " +
                        std::to_string(descriptors.size()) + " descriptors");
  }
  std::set<std::string> seen;
  for (const auto& d : descriptors) {
    if (!seen.insert(d.id).second) {
      throw InternalError("duplicate feature descriptor '" + d.id + "'");
    }
  }
}

std::optional<std::size_t> FeatureMatrix::column_of(const std::string& descriptor_id) const {
  for (std::size_t c = 0; c < descriptors.size(); ++c) {
    if (descriptors[c].id == descriptor_id) return c;
  }
  return std::nullopt;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::size_t>& columns) const {
  FeatureMatrix out;
  out.row_ids = row_ids;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] >= descriptors.size()) throw InputError("column index out of range");
    out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(columns[j]));
    out.descriptors.push_back(descriptors[columns[j]]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t r = 0; r < row_ids.size(); ++r) where[row_ids[r]] = r;
  FeatureMatrix out;
  out.descriptors = descriptors;
  out.row_ids = ids;
  out.values.resize(static_cast<Eigen::Index>(ids.size()), values.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = where.find(ids[i]);
    if (it == where.end()) throw InputError("feature matrix has no row '" + ids[i] + "'");
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(it->second));
  }
  return out;
}

FeatureMatrix assemble(const std::vector<FeatureMatrix>& parts) {
  if (parts.empty()) throw InputError("nothing to assemble");
  FeatureMatrix out;
  out.row_ids = parts.front().row_ids;
  Eigen::Index width = 0;
  for (const auto& p : parts) {
    p.validate();
    if (p.row_ids != out.row_ids) {
      throw InternalError("feature blocks disagree on rows (" +
                          std::to_string(p.row_ids.size()) + " vs " +
                          std::to_string(out.row_ids.size()) + " or different order)");
    }
    width += p.values.cols();
  }
  out.values.resize(static_cast<Eigen::Index>(out.row_ids.size()), width);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.values.middleCols(at, p.values.cols()) = p.values;
    at += p.values.cols();
    out.descriptors.insert(out.descriptors.end(), p.descriptors.begin(), p.descriptors.end());
  }
  out.validate();
  return out;
}

void save_matrix(const std::string& path, const FeatureMatrix& matrix) {
  matrix.validate();
  io::CsvRow header{"example_id"};
  for (const auto& d : matrix.descriptors) header.push_back(d.id);
  std::string out = io::format_csv_row(header);
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    io::CsvRow row{matrix.row_ids[r]};
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      row.push_back(io::format_double(matrix.values(static_cast<Eigen::Index>(r),
                                                    static_cast<Eigen::Index>(c))));
    }
    out += io::format_csv_row(row);
  }
  write_file(path, out);

  io::OrderedJson side = io::OrderedJson::array();
  for (const auto& d : matrix.descriptors) {
    side.push_back({{"id", d.id}, {"kind", to_string(d.kind)}, {"label", d.label}, {"source", d.source}});
  }
  write_file(path + ".descriptors.json", side.dump(2) + "\n");
}

FeatureMatrix load_matrix(const std::string& path) {
  const auto rows = io::parse_csv(read_file(path));
  if (rows.empty() || rows[0].empty() || rows[0][0] != "example_id") {
    throw ParseError(path + ": missing example_id header");
  }
  const auto side = io::Json::parse(read_file(path + ".descriptors.json"));
  FeatureMatrix m;
  for (const auto& d : side) {
    m.descriptors.push_back(FeatureDescriptor{d.at("id"), feature_kind_from_string(d.at("kind").get<std::string>()),
                                              d.at("label"), d.at("source")});
  }
  if (rows[0].size() != m.descriptors.size() + 1) {
    throw ParseError(path + ": header width does not match its descriptors");
  }
  for (std::size_t c = 0; c < m.descriptors.size(); ++c) {
    if (rows[0][c + 1] != m.descriptors[c].id) {
      throw ParseError(path + ": column '" + rows[0][c + 1] + "' does not match descriptor '" +
                       m.descriptors[c].id + "'");
    }
  }
  m.values.resize(static_cast<Eigen::Index>(rows.size() - 1),
                  static_cast<Eigen::Index>(m.descriptors.size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != m.descriptors.size() + 1) {
      throw ParseError(path + ":" + std::to_string(r + 1) + ": wrong number of fields");
    }
    m.row_ids.push_back(rows[r][0]);
    for (std::size_t c = 0; c < m.descriptors.size(); ++c) {
      try {
        m.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = std::stod(rows[r][c + 1]);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(r + 1) + ": bad number '" + rows[r][c + 1] + "'");
      }
    }
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// NLLF

NllfCache::NllfCache(std::string path) : path_(std::move(path)) {
  if (path_.empty() || !file_exists(path_)) return;
  io::for_each_jsonl(path_, [&](const io::OrderedJson& j, std::size_t) {
    entries_[Key{j.at("model"), j.at("example_id"), j.at("bsq_id")}] =
        nllfg::Scores{j.at("yes").get<double>(), j.at("no").get<double>()};
  });
}

std::optional<nllfg::Scores> NllfCache::get(const std::string& model_hash,
                                            const std::string& example_id,
                                            const std::string& bsq_id) const {
  auto it = entries_.find(Key{model_hash, example_id, bsq_id});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void NllfCache::put(const std::string& model_hash, const std::string& example_id,
                    const std::string& bsq_id, const nllfg::Scores& scores) {
  Key key{model_hash, example_id, bsq_id};
  if (entries_.insert_or_assign(key, scores).second) pending_.push_back(std::move(key));
}

void NllfCache::flush() {
  if (path_.empty() || pending_.empty()) return;
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw InputError("cannot append to NLLF cache '" + path_ + "'");
  for (const auto& key : pending_) {
    const auto& s = entries_.at(key);
    io::OrderedJson j;
    j["model"] = std::get<0>(key);
    j["example_id"] = std::get<1>(key);
    j["bsq_id"] = std::get<2>(key);
    j["yes"] = s.yes;
    j["no"] = s.no;
    out << j.dump() << '\n';
  }
  pending_.clear();
}

FeatureMatrix build_nllf(const nllfg::Model& model, const Corpus& examples,
                         const bsq::BsqSet& questions, NllfCache* cache) {
  const auto active = bsq::active_only(questions);
  if (active.empty()) throw ValidationError("no active questions to build NLLF from");
  FeatureMatrix m;
  for (const auto& q : active) {
    m.descriptors.push_back({"nllf:" + q.id + ":yes", FeatureKind::nllf, q.text, q.id});
    m.descriptors.push_back({"nllf:" + q.id + ":no", FeatureKind::nllf, q.text, q.id});
  }
  m.values.resize(static_cast<Eigen::Index>(examples.size()),
                  static_cast<Eigen::Index>(2 * active.size()));
  const std::string hash = cache ? model.hash() : std::string{};
  for (std::size_t r = 0; r < examples.size(); ++r) {
    const auto& ex = examples[r];
    m.row_ids.push_back(ex.id);
    const std::string premise = ex.premise();
    for (std::size_t i = 0; i < active.size(); ++i) {
      std::optional<nllfg::Scores> s;
      if (cache) s = cache->get(hash, ex.id, active[i].id);
      if (!s) {
        s = nllfg::score(model, premise, active[i].text);
        if (cache) {
          cache->count_call();
          cache->put(hash, ex.id, active[i].id, *s);
        }
      }
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(2 * i)) = s->yes;
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(2 * i + 1)) = s->no;
    }
  }
  if (cache) cache->flush();
  return m;
}

// ---------------------------------------------------------------------------
// Expert features

namespace {

char32_t fold(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

bool is_vowel(char32_t c) {
  switch (fold(c)) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
    case 0xE1: case 0xE9: case 0xED: case 0xF3: case 0xFA: case 0xFC:
    case 0xE0: case 0xE8: case 0xEC: case 0xF2: case 0xF9:
      return true;
    default:
      return false;
  }
}

bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

bool is_alpha(char32_t c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= 0xC0 && c <= 0x24F && c != 0xD7 && c != 0xF7) || (c >= 0x370 && c < 0x2000);
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == 0xA0;
}

bool is_math_punct(char32_t c) {
  switch (c) {
    case '+': case '-': case '*': case '/': case '=': case '<': case '>': case '^': case '%':
      return true;
    default:
      return false;
  }
}

bool is_punct(char32_t c) {
  if (c < 0x80) return c > 0x20 && c < 0x7F && !is_digit(c) && !is_alpha(c);
  switch (c) {
    case 0xA1: case 0xBF: case 0xAB: case 0xBB: case 0x2026: case 0x2013:
    case 0x2014: case 0x2018: case 0x2019: case 0x201C: case 0x201D:
      return true;
    default:
      return false;
  }
}

std::vector<std::string> whitespace_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

const std::regex& number_regex() {
  static const std::regex re("[0-9]+(?:[.,/][0-9]+)*");
  return re;
}

template <typename Pred>
double count_if_cp(const std::vector<char32_t>& cps, Pred pred) {
  return static_cast<double>(std::count_if(cps.begin(), cps.end(), pred));
}

template <typename Pred>
double longest_run(const std::vector<char32_t>& cps, Pred pred) {
  std::size_t best = 0, cur = 0;
  for (char32_t c : cps) {
    cur = pred(c) ? cur + 1 : 0;
    best = std::max(best, cur);
  }
  return static_cast<double>(best);
}

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

using Statistic = std::function<double(const std::string&, const std::vector<char32_t>&,
                                       const std::string&)>;

const std::map<std::string, Statistic>& statistic_table() {
  static const std::map<std::string, Statistic> table = [] {
    std::map<std::string, Statistic> t;
    auto len = [](const std::vector<char32_t>& c) { return static_cast<double>(c.size()); };
    auto numbers = [](const std::string& s) {
      std::vector<std::string> out;
      for (std::sregex_iterator it(s.begin(), s.end(), number_regex()), end; it != end; ++it) {
        out.push_back(it->str());
      }
      return out;
    };
    t["length"] = [=](auto&, auto& c, auto&) { return len(c); };
    t["non_space_chars"] = [](auto&, auto& c, auto&) { return count_if_cp(c, [](char32_t x) { return !is_space(x); }); };
    t["word_count"] = [](auto& s, auto&, auto&) { return static_cast<double>(whitespace_words(s).size()); };
    t["alpha_count"] = [](auto&, auto& c, auto&) { return count_if_cp(c, is_alpha); };
    t["digit_count"] = [](auto&, auto& c, auto&) { return count_if_cp(c, is_digit); };
    t["vowel_count"] = [](auto&, auto& c, auto&) { return count_if_cp(c, is_vowel); };
    t["punct_count"] = [](auto&, auto& c, auto&) { return count_if_cp(c, is_punct); };
    t["math_punct_count"] = [](auto&, auto& c, auto&) { return count_if_cp(c, is_math_punct); };
    t["number_count"] = [=](auto& s, auto&, auto&) { return static_cast<double>(numbers(s).size()); };
    t["has_number"] = [=](auto& s, auto&, auto&) { return numbers(s).empty() ? 0.0 : 1.0; };
    t["longest_number"] = [=](auto& s, auto&, auto&) {
      std::size_t best = 0;
      for (const auto& n : numbers(s)) best = std::max(best, n.size());
      return static_cast<double>(best);
    };
    t["non_number_words"] = [](auto& s, auto&, auto&) {
      double n = 0;
      for (const auto& w : whitespace_words(s)) {
        if (!std::regex_match(w, number_regex())) ++n;
      }
      return n;
    };
    t["max_char_run"] = [](auto&, auto& c, auto&) {
      std::size_t best = 0, cur = 0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        cur = (i > 0 && fold(c[i]) == fold(c[i - 1])) ? cur + 1 : 1;
        best = std::max(best, cur);
      }
      return static_cast<double>(best);
    };
    t["max_vowel_run"] = [](auto&, auto& c, auto&) { return longest_run(c, is_vowel); };
    t["max_consonant_run"] = [](auto&, auto& c, auto&) {
      return longest_run(c, [](char32_t x) { return !is_vowel(x) && !is_space(x); });
    };
    t["is_blank"] = [](auto& s, auto&, auto&) { return trim(s).empty() ? 1.0 : 0.0; };
    t["is_digit"] = [](auto& s, auto&, auto&) {
      const std::string v = trim(s);
      return !v.empty() && std::all_of(v.begin(), v.end(), [](char ch) { return ch >= '0' && ch <= '9'; }) ? 1.0 : 0.0;
    };
    t["vowel_ratio"] = [=](auto&, auto& c, auto&) { return ratio(count_if_cp(c, is_vowel), len(c)); };
    t["digit_ratio"] = [=](auto&, auto& c, auto&) { return ratio(count_if_cp(c, is_digit), len(c)); };
    t["alpha_ratio"] = [=](auto&, auto& c, auto&) { return ratio(count_if_cp(c, is_alpha), len(c)); };
    t["punct_ratio"] = [=](auto&, auto& c, auto&) { return ratio(count_if_cp(c, is_punct), len(c)); };
    t["non_math_punct_ratio"] = [=](auto&, auto& c, auto&) {
      return ratio(count_if_cp(c, [](char32_t x) { return is_punct(x) && !is_math_punct(x); }), len(c));
    };
    t["non_digit_ratio"] = [=](auto&, auto& c, auto&) {
      return ratio(count_if_cp(c, [](char32_t x) { return !is_digit(x); }), len(c));
    };
    t["punct_or_digit_ratio"] = [=](auto&, auto& c, auto&) {
      return ratio(count_if_cp(c, [](char32_t x) { return is_punct(x) || is_digit(x); }), len(c));
    };
    t["other_symbol_ratio"] = [=](auto&, auto& c, auto&) {
      return ratio(count_if_cp(c, [](char32_t x) {
                     return !is_digit(x) && !(is_punct(x) && !is_math_punct(x));
                   }),
                   len(c));
    };
    t["letter_frequency"] = [](auto&, auto& c, auto& arg) {
      const auto target = utf8_decode(arg);
      if (target.size() != 1) return 0.0;
      return count_if_cp(c, [&](char32_t x) { return fold(x) == fold(target[0]); });
    };
    return t;
  }();
  return table;
}

RuleKind rule_kind_from_string(const std::string& s) {
  if (s == "keyword") return RuleKind::keyword;
  if (s == "prefix") return RuleKind::prefix;
  if (s == "regex") return RuleKind::regex;
  if (s == "statistic") return RuleKind::statistic;
  if (s == "lexicon") return RuleKind::lexicon;
  if (s == "equals") return RuleKind::equals;
  if (s == "overlap") return RuleKind::overlap;
  throw ConfigError("unknown rule kind '" + s + "'");
}

RuleOutput rule_output_from_string(const std::string& s) {
  if (s == "boolean") return RuleOutput::boolean;
  if (s == "count") return RuleOutput::count;
  if (s == "ratio") return RuleOutput::ratio;
  throw ConfigError("unknown rule output '" + s + "'");
}

// Occurrences of `needle` in `hay` (both lowercased) that start at a word
// boundary, and also end at one when `whole_word` is set.
std::size_t bounded_occurrences(const std::string& hay, const std::string& needle,
                                bool whole_word) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + 1)) {
    const bool start_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(hay[pos - 1]));
    const std::size_t end = pos + needle.size();
    const bool end_ok = !whole_word || end == hay.size() ||
                        !is_word_byte(static_cast<unsigned char>(hay[end]));
    if (start_ok && end_ok) ++n;
  }
  return n;
}

std::string strip_punct(const std::string& s) {
  const auto cps = utf8_decode(s);
  std::size_t b = 0, e = cps.size();
  while (b < e && (is_punct(cps[b]) || is_space(cps[b]))) ++b;
  while (e > b && (is_punct(cps[e - 1]) || is_space(cps[e - 1]))) --e;
  // Re-encode the kept range from the original bytes.
  std::size_t byte_b = 0, byte_e = s.size(), cp = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) continue;
    if (cp == b) byte_b = i;
    if (cp == e) {
      byte_e = i;
      break;
    }
    ++cp;
  }
  if (b == e) return {};
  return s.substr(byte_b, byte_e - byte_b);
}

}  // namespace

const std::vector<std::string>& statistic_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : statistic_table()) out.push_back(name);
    return out;
  }();
  return names;
}

double text_statistic(const std::string& name, const std::string& text,
                      const std::string& argument) {
  const auto& table = statistic_table();
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown text statistic '" + name + "'");
  return it->second(text, utf8_decode(text), argument);
}

RuleRegistry parse_registry(const io::Json& j) {
  RuleRegistry reg;
  reg.task = j.value("task", "");
  std::set<std::string> ids;
  for (const auto& r : j.at("rules")) {
    ExpertRule rule;
    rule.id = r.at("id").get<std::string>();
    if (!ids.insert(rule.id).second) throw ConfigError("duplicate rule id '" + rule.id + "'");
    auto bad = [&](const std::string& why) { return ConfigError("rule '" + rule.id + "': " + why); };
    rule.category = r.value("category", "");
    rule.label = r.value("label", rule.id);
    rule.kind = rule_kind_from_string(r.at("kind").get<std::string>());
    rule.output = rule_output_from_string(r.value("output", "boolean"));
    rule.pattern = r.value("pattern", "");
    rule.statistic = r.value("statistic", "");
    if (r.contains("words")) rule.words = r["words"].get<std::vector<std::string>>();
    if (r.contains("field")) rule.field = r["field"].get<std::string>();
    if (r.contains("other_field")) rule.other_field = r["other_field"].get<std::string>();
    switch (rule.kind) {
      case RuleKind::keyword:
      case RuleKind::prefix:
        if (rule.pattern.empty()) throw bad("needs a non-empty pattern");
        rule.pattern = to_lower_ascii(rule.pattern);
        break;
      case RuleKind::regex:
        if (rule.pattern.empty()) throw bad("needs a non-empty pattern");
        try {
          rule.compiled.emplace(rule.pattern, std::regex::ECMAScript | std::regex::icase);
        } catch (const std::regex_error& e) {
          throw bad(std::string("malformed regex: ") + e.what());
        }
        break;
      case RuleKind::statistic:
        if (!statistic_table().count(rule.statistic)) throw bad("unknown statistic '" + rule.statistic + "'");
        break;
      case RuleKind::lexicon:
      case RuleKind::equals:
        if (rule.words.empty()) throw bad("needs a non-empty word list");
        for (auto& w : rule.words) w = casefold(w);
        break;
      case RuleKind::overlap:
        if (!rule.field || !rule.other_field) throw bad("needs field and other_field");
        for (auto& w : rule.words) w = casefold(w);
        break;
    }
    reg.rules.push_back(std::move(rule));
  }
  return reg;
}

RuleRegistry load_registry(const std::string& path) {
  try {
    return parse_registry(io::Json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

double evaluate_rule(const ExpertRule& rule, const Example& example) {
  const std::string text = rule.field ? example.field(*rule.field) : example.premise();
  const std::string lowered = to_lower_ascii(text);
  const auto tokens = word_tokens(text);
  const double n_tokens = static_cast<double>(tokens.size());
  double count = 0.0;
  double denom = n_tokens;
  switch (rule.kind) {
    case RuleKind::keyword:
      count = static_cast<double>(bounded_occurrences(lowered, rule.pattern, true));
      break;
    case RuleKind::prefix:
      count = static_cast<double>(bounded_occurrences(lowered, rule.pattern, false));
      break;
    case RuleKind::regex:
      for (std::sregex_iterator it(text.begin(), text.end(), *rule.compiled), end; it != end; ++it) {
        if (it->length() > 0) count += 1.0;
      }
      break;
    case RuleKind::statistic: {
      const double v = text_statistic(rule.statistic, text, rule.pattern);
      if (rule.output == RuleOutput::boolean) return v > 0 ? 1.0 : 0.0;
      return v;
    }
    case RuleKind::lexicon: {
      const std::set<std::string> words(rule.words.begin(), rule.words.end());
      for (const auto& t : tokens) count += words.count(t) ? 1.0 : 0.0;
      break;
    }
    case RuleKind::equals: {
      const std::string v = casefold(strip_punct(text));
      count = std::find(rule.words.begin(), rule.words.end(), v) != rule.words.end() ? 1.0 : 0.0;
      denom = 1.0;
      break;
    }
    case RuleKind::overlap: {
      const auto other = word_tokens(example.field(*rule.other_field));
      std::set<std::string> a(tokens.begin(), tokens.end());
      std::set<std::string> b(other.begin(), other.end());
      const std::set<std::string> only(rule.words.begin(), rule.words.end());
      std::size_t inter = 0;
      for (const auto& w : a) {
        if (b.count(w) && (only.empty() || only.count(w))) ++inter;
      }
      count = static_cast<double>(inter);
      denom = static_cast<double>(a.size());
      break;
    }
  }
  switch (rule.output) {
    case RuleOutput::boolean: return count > 0 ? 1.0 : 0.0;
    case RuleOutput::count: return count;
    case RuleOutput::ratio: return ratio(count, denom);
  }
  return count;
}

FeatureMatrix build_ef(const RuleRegistry& registry, const Corpus& examples) {
  FeatureMatrix m;
  for (const auto& r : registry.rules) {
    m.descriptors.push_back({"ef:" + r.id, FeatureKind::ef, r.label, r.id});
  }
  m.values.resize(static_cast<Eigen::Index>(examples.size()),
                  static_cast<Eigen::Index>(registry.rules.size()));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    m.row_ids.push_back(examples[i].id);
    for (std::size_t c = 0; c < registry.rules.size(); ++c) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          evaluate_rule(registry.rules[c], examples[i]);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Bag of n-grams

std::vector<std::string> bong_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t cur_len = 0;
  auto flush = [&] {
    if (cur_len >= 2) out.push_back(cur);
    cur.clear();
    cur_len = 0;
  };
  const auto cps = utf8_decode(text);
  for (char32_t c : cps) {
    const bool word = is_alpha(c) || is_digit(c) || c == '_';
    if (!word) {
      flush();
      continue;
    }
    const char32_t f = fold(c);
    // UTF-8 encode the folded code point.
    if (f < 0x80) {
      cur.push_back(static_cast<char>(f));
    } else if (f < 0x800) {
      cur.push_back(static_cast<char>(0xC0 | (f >> 6)));
      cur.push_back(static_cast<char>(0x80 | (f & 0x3F)));
    } else if (f < 0x10000) {
      cur.push_back(static_cast<char>(0xE0 | (f >> 12)));
      cur.push_back(static_cast<char>(0x80 | ((f >> 6) & 0x3F)));
      cur.push_back(static_cast<char>(0x80 | (f & 0x3F)));
    } else {
      cur.push_back(static_cast<char>(0xF0 | (f >> 18)));
      cur.push_back(static_cast<char>(0x80 | ((f >> 12) & 0x3F)));
      cur.push_back(static_cast<char>(0x80 | ((f >> 6) & 0x3F)));
      cur.push_back(static_cast<char>(0x80 | (f & 0x3F)));
    }
    ++cur_len;
  }
  flush();
  return out;
}

std::vector<std::string> BongVocabulary::ngrams(const std::string& text) const {
  const auto toks = bong_tokens(text);
  std::vector<std::string> out;
  for (std::size_t n = params.ngram_min; n <= params.ngram_max; ++n) {
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      std::string g = toks[i];
      for (std::size_t k = 1; k < n; ++k) g += " " + toks[i + k];
      out.push_back(std::move(g));
    }
  }
  return out;
}

Eigen::RowVectorXd BongVocabulary::transform(const std::string& text) const {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(terms.size()));
  for (const auto& g : ngrams(text)) {
    auto it = index.find(g);
    if (it != index.end()) row(static_cast<Eigen::Index>(it->second)) += 1.0;
  }
  for (Eigen::Index c = 0; c < row.size(); ++c) row(c) *= idf[static_cast<std::size_t>(c)];
  const double norm = row.norm();
  if (norm > 0) row /= norm;
  return row;
}

BongVocabulary fit_bong(const std::vector<std::string>& train_texts, const BongParams& params) {
  if (train_texts.empty()) throw ValidationError("cannot fit n-gram vocabulary on an empty corpus");
  if (params.ngram_min < 1 || params.ngram_max < params.ngram_min || params.max_features < 1) {
    throw ConfigError("n-gram range must satisfy 1 <= min <= max and max_features >= 1");
  }
  BongVocabulary v;
  v.params = params;
  std::map<std::string, std::pair<std::size_t, std::size_t>> stats;  // (total count, df)
  for (const auto& t : train_texts) {
    std::set<std::string> seen;
    for (auto& g : v.ngrams(t)) {
      auto& s = stats[g];
      ++s.first;
      if (seen.insert(g).second) ++s.second;
    }
  }
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> ranked(stats.begin(), stats.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second.first > b.second.first; });
  if (ranked.size() > params.max_features) ranked.resize(params.max_features);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const double n = static_cast<double>(train_texts.size());
  for (const auto& [term, s] : ranked) {
    v.index[term] = v.terms.size();
    v.terms.push_back(term);
    v.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(s.second))) + 1.0);
  }
  return v;
}

FeatureMatrix build_bong(const BongVocabulary& vocabulary, const Corpus& examples) {
  FeatureMatrix m;
  for (std::size_t i = 0; i < vocabulary.terms.size(); ++i) {
    m.descriptors.push_back({"bong:" + vocabulary.terms[i], FeatureKind::bong,
                             vocabulary.terms[i], std::to_string(i)});
  }
  m.values.resize(static_cast<Eigen::Index>(examples.size()),
                  static_cast<Eigen::Index>(vocabulary.terms.size()));
  for (std::size_t r = 0; r < examples.size(); ++r) {
    m.row_ids.push_back(examples[r].id);
    m.values.row(static_cast<Eigen::Index>(r)) = vocabulary.transform(examples[r].premise());
  }
  return m;
}

io::OrderedJson bong_to_json(const BongVocabulary& vocabulary) {
  io::OrderedJson j;
  j["max_features"] = vocabulary.params.max_features;
  j["ngram_min"] = vocabulary.params.ngram_min;
  j["ngram_max"] = vocabulary.params.ngram_max;
  j["terms"] = vocabulary.terms;
  j["idf"] = vocabulary.idf;
  return j;
}

BongVocabulary bong_from_json(const io::Json& j) {
  BongVocabulary v;
  v.params.max_features = j.at("max_features");
  v.params.ngram_min = j.at("ngram_min");
  v.params.ngram_max = j.at("ngram_max");
  v.terms = j.at("terms").get<std::vector<std::string>>();
  v.idf = j.at("idf").get<std::vector<double>>();
  if (v.idf.size() != v.terms.size()) throw ParseError("n-gram vocabulary and idf lengths differ");
  for (std::size_t i = 0; i < v.terms.size(); ++i) v.index[v.terms[i]] = i;
  return v;
}

}  // namespace nllf::features
