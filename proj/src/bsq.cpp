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

#include "nllf/bsq.hpp"

#include <cstdio>
#include <map>
#include <numeric>
#include <regex>
#include <unordered_map>
#include <unordered_set>

namespace nllf::bsq {

std::string to_string(Origin origin) {
  switch (origin) {
    case Origin::llm:
      return "llm";
    case Origin::linguistic_rule:
      return "linguistic-rule";
    case Origin::human:
      return "human";
    case Origin::paraphrase:
      return "paraphrase";
  }
  return "llm";
}

Origin origin_from_string(std::string_view text) {
  if (text == "llm") return Origin::llm;
  if (text == "linguistic-rule") return Origin::linguistic_rule;
  if (text == "human") return Origin::human;
  if (text == "paraphrase") return Origin::paraphrase;
  throw ParseError("unknown question origin '" + std::string(text) + "'");
}

void validate_question_text(const std::string& text, const std::string& id) {
  const std::string t = trim(text);
  if (t.empty() || t.back() != '?') {
    throw ValidationError("question '" + id +
                          "' must be non-empty and end with '?'");
  }
}

std::vector<std::string> parse_questions(std::string_view completion) {
  static const std::regex marker(
      R"(^\s*(?:\(?\d+[.):]|[-*]|Q\d+[.:]))",
      std::regex::ECMAScript | std::regex::icase);
  std::vector<std::string> out;
  for (const auto& line : split_lines(completion)) {
    std::string text = std::regex_replace(line, marker, "",
                                          std::regex_constants::format_first_only);
    // Bullet characters outside ASCII are not covered by the regex above.
    for (const char* bullet : {"\xE2\x80\xA2", "\xC2\xB7"}) {
      const std::string b(bullet);
      const std::string t = trim(text);
      if (t.rfind(b, 0) == 0) text = t.substr(b.size());
    }
    text = trim(text);
    if (text.size() > 1 && text.back() == '?') out.push_back(text);
  }
  return out;
}

std::string dedup_key(std::string_view text) { return casefold(text); }

double normalized_edit_distance(std::string_view a, std::string_view b) {
  const auto x = utf8_decode(a);
  const auto y = utf8_decode(b);
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 0.0;
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t subst = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[y.size()]) / static_cast<double>(longest);
}

llm::Bindings example_bindings(const Example& example) {
  llm::Bindings b;
  for (const auto& [name, value] : example.fields) b[name] = value;
  b["text"] = example.premise();
  b["id"] = example.id;
  return b;
}

namespace {

// Only bind what the template declares, so unused-binding warnings stay
// meaningful for callers that pass explicit bindings.
llm::Bindings restrict_to(const llm::PromptTemplate& tmpl,
                          const llm::Bindings& all) {
  llm::Bindings out;
  for (const auto& name : tmpl.placeholders) {
    auto it = all.find(name);
    if (it != all.end()) out.insert(*it);
  }
  return out;
}

std::string raw_id(std::size_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "raw-%04zu", index + 1);
  return buffer;
}

}  // namespace

GenerationResult generate_raw_bsqs(const Corpus& samples,
                                   const llm::PromptTemplate& tmpl,
                                   std::size_t per_sample, llm::Gateway& gateway,
                                   const llm::CompletionParams& params) {
  if (per_sample < 1) throw ValidationError("per_sample must be at least 1");
  if (samples.empty()) throw ValidationError("no samples for question generation");

  std::vector<llm::Messages> requests;
  requests.reserve(samples.size());
  for (const auto& ex : samples) {
    requests.push_back(llm::render(tmpl, restrict_to(tmpl, example_bindings(ex))));
  }
  const auto responses = gateway.complete_all(requests, params);

  GenerationResult result;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    auto questions = parse_questions(responses[s].text);
    if (questions.empty()) {
      result.misses.push_back(samples[s].id);
      continue;
    }
    if (questions.size() > per_sample) questions.resize(per_sample);
    result.parsed_before_dedup += questions.size();
    for (auto& q : questions) {
      const std::string key = dedup_key(q);
      auto it = index.find(key);
      if (it != index.end()) {
        auto& sources = result.raw[it->second].sources;
        if (std::find(sources.begin(), sources.end(), samples[s].id) ==
            sources.end()) {
          sources.push_back(samples[s].id);
        }
        continue;
      }
      Bsq b;
      b.id = raw_id(result.raw.size());
      b.text = std::move(q);
      b.origin = Origin::llm;
      b.sources = {samples[s].id};
      index.emplace(key, result.raw.size());
      result.raw.push_back(std::move(b));
    }
  }
  return result;
}

namespace {

const std::vector<std::string> kReviewColumns = {
    "raw_id", "raw_text", "suggested_group", "group_id", "reformulated_text",
    "keep"};

std::vector<std::string> suggest_groups(const BsqSet& raw, double threshold) {
  std::vector<std::size_t> parent(raw.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::vector<std::string> keys;
  for (const auto& b : raw) keys.push_back(dedup_key(b.text));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t j = i + 1; j < raw.size(); ++j) {
      if (normalized_edit_distance(keys[i], keys[j]) <= threshold) {
        const auto ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  std::map<std::size_t, std::string> names;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto root = find(i);
    auto it = names.find(root);
    if (it == names.end()) {
      it = names.emplace(root, "s" + std::to_string(names.size() + 1)).first;
    }
    out.push_back(it->second);
  }
  return out;
}

bool parse_bool(const std::string& text, const std::string& where) {
  const std::string t = to_lower_ascii(trim(text));
  if (t == "true" || t == "yes" || t == "1" || t == "y") return true;
  if (t == "false" || t == "no" || t == "0" || t == "n") return false;
  throw ValidationError(where + ": keep must be true/false, got '" + text + "'");
}

}  // namespace

void export_for_review(const BsqSet& raw, const std::string& path,
                       double near_duplicate_threshold) {
  const auto groups = suggest_groups(raw, near_duplicate_threshold);
  std::string out = io::format_csv_row(kReviewColumns);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out += io::format_csv_row(
        {raw[i].id, raw[i].text, groups[i], "", "", "true"});
  }
  write_file(path, out);
}

void export_identity_review(const BsqSet& raw, const std::string& path) {
  std::string out = io::format_csv_row(kReviewColumns);
  for (const auto& b : raw) {
    out += io::format_csv_row({b.id, b.text, b.id, b.id, b.text, "true"});
  }
  write_file(path, out);
}

BsqSet import_curated(const std::string& path, const BsqSet& raw) {
  const auto rows = io::parse_csv(read_file(path));
  if (rows.empty()) throw ValidationError(path + ": empty review file");
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < rows[0].size(); ++c) column[trim(rows[0][c])] = c;
  for (const auto& name : kReviewColumns) {
    if (!column.count(name)) {
      throw ValidationError(path + ": missing column '" + name + "'");
    }
  }
  std::unordered_set<std::string> known;
  for (const auto& b : raw) known.insert(b.id);

  struct Group {
    std::vector<std::string> members;
    std::string text;
  };
  std::vector<std::string> order;
  std::map<std::string, Group> groups;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    const std::string where = path + " row " + std::to_string(r + 1);
    auto cell = [&](const std::string& name) -> std::string {
      const auto c = column.at(name);
      return c < row.size() ? trim(row[c]) : std::string();
    };
    const std::string id = cell("raw_id");
    if (!known.count(id)) {
      throw ValidationError(where + ": unknown raw question id '" + id + "'");
    }
    const bool keep = parse_bool(cell("keep"), where);
    const std::string group = cell("group_id");
    if (group.empty()) {
      if (keep) {
        throw ValidationError(where + ": kept question '" + id +
                              "' has no group_id");
      }
      continue;
    }
    auto [it, inserted] = groups.try_emplace(group);
    if (inserted) order.push_back(group);
    if (keep) it->second.members.push_back(id);
    const std::string text = cell("reformulated_text");
    if (!text.empty()) {
      if (!it->second.text.empty() && it->second.text != text) {
        throw ValidationError(where + ": group '" + group +
                              "' has conflicting reformulations");
      }
      it->second.text = text;
    }
  }

  BsqSet curated;
  for (const auto& name : order) {
    const auto& g = groups.at(name);
    if (g.members.empty()) {
      throw ValidationError(path + ": group '" + name + "' has no kept members");
    }
    if (g.text.empty()) {
      throw ValidationError(path + ": group '" + name +
                            "' has no reformulated_text");
    }
    Bsq b;
    b.id = "cur-" + name;
    b.text = g.text;
    b.origin = Origin::llm;
    b.group_id = name;
    b.sources = g.members;
    validate_question_text(b.text, b.id);
    curated.push_back(std::move(b));
  }
  return curated;
}

BsqSet augment(const BsqSet& curated, const AugmentSources& extras) {
  if (curated.empty()) throw ValidationError("augment needs curated questions");
  BsqSet out;
  std::unordered_set<std::string> texts;
  std::unordered_map<std::string, std::string> ids;  // id -> key
  auto add = [&](const Bsq& b) {
    validate_question_text(b.text, b.id);
    const std::string key = dedup_key(b.text);
    if (!texts.insert(key).second) return;
    auto [it, inserted] = ids.emplace(b.id, key);
    if (!inserted) {
      throw ValidationError("question id '" + b.id +
                            "' is used by two different questions");
    }
    Bsq copy = b;
    copy.active = true;
    out.push_back(std::move(copy));
  };
  for (const auto& b : curated) add(b);
  for (const BsqSet* source :
       {&extras.raw_pool, &extras.linguistic, &extras.human, &extras.paraphrases}) {
    for (const auto& b : *source) add(b);
  }
  return out;
}

BsqSet active_only(const BsqSet& set) {
  BsqSet out;
  for (const auto& b : set) {
    if (b.active) out.push_back(b);
  }
  return out;
}

std::string bsqs_to_jsonl(const BsqSet& set) {
  std::string out;
  for (const auto& b : set) {
    io::OrderedJson j;
    j["id"] = b.id;
    j["text"] = b.text;
    j["origin"] = to_string(b.origin);
    if (b.group_id) j["group_id"] = *b.group_id;
    j["active"] = b.active;
    if (!b.sources.empty()) j["sources"] = b.sources;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void save_bsqs(const std::string& path, const BsqSet& set) {
  write_file(path, bsqs_to_jsonl(set));
}

BsqSet load_bsqs(const std::string& path) {
  BsqSet out;
  std::unordered_set<std::string> ids;
  io::for_each_jsonl(path, [&](const io::OrderedJson& j, std::size_t line) {
    const std::string where = path + ":" + std::to_string(line);
    try {
      Bsq b;
      b.id = j.at("id").get<std::string>();
      b.text = j.at("text").get<std::string>();
      b.origin = origin_from_string(j.value("origin", "llm"));
      if (j.contains("group_id")) b.group_id = j["group_id"].get<std::string>();
      b.active = j.value("active", true);
      if (j.contains("sources")) {
        b.sources = j["sources"].get<std::vector<std::string>>();
      }
      validate_question_text(b.text, b.id);
      if (!ids.insert(b.id).second) {
        throw ValidationError("duplicate question id '" + b.id + "'");
      }
      out.push_back(std::move(b));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  });
  return out;
}

}  // namespace nllf::bsq
