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

#include "nllf/weak_labeler.hpp"

#include <map>
#include <set>
#include <tuple>

namespace nllf::weak {

std::string to_string(Answer answer) { return answer == Answer::yes ? "yes" : "no"; }

Answer answer_from_string(std::string_view text) {
  if (text == "yes") return Answer::yes;
  if (text == "no") return Answer::no;
  throw ParseError("unknown answer '" + std::string(text) + "'");
}

std::string to_string(LabelMode mode) {
  return mode == LabelMode::direct ? "direct" : "cot";
}

LabelMode label_mode_from_string(std::string_view text) {
  if (text == "direct") return LabelMode::direct;
  if (text == "cot") return LabelMode::cot;
  throw ConfigError("unknown label mode '" + std::string(text) + "'");
}

Lexicon Lexicon::english() { return Lexicon{}; }

Lexicon Lexicon::spanish() {
  Lexicon l;
  l.yes = {"sí", "sÍ", "si"};
  l.no = {"no"};
  l.answer_markers = {"respuesta", "answer"};
  return l;
}

Lexicon Lexicon::from_json(const io::Json& j) {
  Lexicon l;
  if (j.contains("language")) {
    const std::string lang = j["language"];
    if (lang == "es") l = spanish();
    else if (lang != "en") throw ConfigError("unknown lexicon language '" + lang + "'");
  }
  if (j.contains("yes")) l.yes = j["yes"].get<std::vector<std::string>>();
  if (j.contains("no")) l.no = j["no"].get<std::vector<std::string>>();
  if (j.contains("answer_markers")) {
    l.answer_markers = j["answer_markers"].get<std::vector<std::string>>();
  }
  return l;
}

std::optional<std::size_t> first_class_token(
    std::string_view text, const std::vector<std::vector<std::string>>& classes) {
  std::vector<std::vector<std::string>> lowered(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (const auto& w : classes[c]) lowered[c].push_back(to_lower_ascii(w));
  }
  for (const auto& token : word_tokens(text)) {
    for (std::size_t c = 0; c < lowered.size(); ++c) {
      for (const auto& w : lowered[c]) {
        if (token == w) return c;
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> after_last_marker(
    std::string_view text, const std::vector<std::string>& markers) {
  const std::string lowered = to_lower_ascii(text);
  std::optional<std::size_t> best;
  std::size_t best_len = 0;
  for (const auto& m : markers) {
    const std::string needle = to_lower_ascii(m);
    const auto pos = lowered.rfind(needle);
    if (pos == std::string::npos) continue;
    if (!best || pos > *best) {
      best = pos;
      best_len = needle.size();
    }
  }
  if (!best) return std::nullopt;
  return std::string(text.substr(*best + best_len));
}

std::optional<Answer> extract_answer(std::string_view raw, LabelMode mode,
                                     const Lexicon& lexicon) {
  const std::vector<std::vector<std::string>> classes = {lexicon.yes, lexicon.no};
  auto decide = [&](std::string_view segment) -> std::optional<Answer> {
    const auto hit = first_class_token(segment, classes);
    if (!hit) return std::nullopt;
    return *hit == 0 ? Answer::yes : Answer::no;
  };
  if (mode == LabelMode::cot) {
    if (const auto tail = after_last_marker(raw, lexicon.answer_markers)) {
      if (auto a = decide(*tail)) return a;
    }
  }
  return decide(raw);
}

WeakLabelResult weak_label(const Corpus& examples, const bsq::BsqSet& questions,
                           LabelMode mode, const llm::PromptTemplate& tmpl,
                           llm::Gateway& gateway,
                           const llm::CompletionParams& params,
                           const Lexicon& lexicon) {
  std::vector<llm::Messages> requests;
  requests.reserve(examples.size() * questions.size());
  for (const auto& ex : examples) {
    auto all = bsq::example_bindings(ex);
    for (const auto& q : questions) {
      all["question"] = q.text;
      llm::Bindings bindings;
      for (const auto& name : tmpl.placeholders) {
        if (auto it = all.find(name); it != all.end()) bindings.insert(*it);
      }
      requests.push_back(llm::render(tmpl, bindings));
    }
  }
  const auto responses = gateway.complete_all(requests, params);

  WeakLabelResult result;
  std::size_t k = 0;
  for (const auto& ex : examples) {
    for (const auto& q : questions) {
      const std::string& raw = responses[k++].text;
      if (auto answer = extract_answer(raw, mode, lexicon)) {
        result.labels.push_back(
            WeakLabel{ex.id, q.id, *answer, mode, raw, sha256_hex(raw)});
      } else {
        result.failures.push_back(ExtractionFailure{ex.id, q.id, raw});
      }
    }
  }
  check_unique(result.labels);
  return result;
}

std::vector<HistogramRow> label_histogram(const WeakLabelResult& result,
                                          const bsq::BsqSet& questions) {
  std::vector<HistogramRow> rows;
  std::map<std::string, std::size_t> index;
  for (const auto& q : questions) {
    index[q.id] = rows.size();
    rows.push_back(HistogramRow{q.id, q.text});
  }
  for (const auto& l : result.labels) {
    auto it = index.find(l.bsq_id);
    if (it == index.end()) continue;
    (l.answer == Answer::yes ? rows[it->second].yes : rows[it->second].no)++;
  }
  for (const auto& f : result.failures) {
    if (auto it = index.find(f.bsq_id); it != index.end()) rows[it->second].failed++;
  }
  return rows;
}

std::string histogram_csv(const std::vector<HistogramRow>& rows) {
  std::string out = io::format_csv_row({"bsq_id", "question", "yes", "no", "failed"});
  for (const auto& r : rows) {
    out += io::format_csv_row({r.bsq_id, r.text, std::to_string(r.yes),
                               std::to_string(r.no), std::to_string(r.failed)});
  }
  return out;
}

std::string histogram_chart(const std::vector<HistogramRow>& rows,
                            std::size_t width) {
  std::size_t widest = 1;
  for (const auto& r : rows) widest = std::max(widest, r.yes + r.no);
  std::string out;
  for (const auto& r : rows) {
    const std::size_t y = r.yes * width / widest;
    const std::size_t n = r.no * width / widest;
    out += r.bsq_id + " |" + std::string(y, '#') + std::string(n, '.') + "| yes=" +
           std::to_string(r.yes) + " no=" + std::to_string(r.no) + "  " + r.text +
           "\n";
  }
  return out;
}

void check_unique(const std::vector<WeakLabel>& labels) {
  std::set<std::tuple<std::string, std::string, LabelMode>> seen;
  for (const auto& l : labels) {
    if (!seen.emplace(l.example_id, l.bsq_id, l.mode).second) {
      throw ValidationError("duplicate weak label for (" + l.example_id + ", " +
                            l.bsq_id + ", " + to_string(l.mode) + ")");
    }
  }
}

void save_labels(const std::string& path, const std::vector<WeakLabel>& labels) {
  std::string out;
  for (const auto& l : labels) {
    io::OrderedJson j;
    j["example_id"] = l.example_id;
    j["bsq_id"] = l.bsq_id;
    j["answer"] = to_string(l.answer);
    j["mode"] = to_string(l.mode);
    j["raw_hash"] = l.raw_hash;
    out += j.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

std::vector<WeakLabel> load_labels(const std::string& path) {
  std::vector<WeakLabel> out;
  io::for_each_jsonl(path, [&](const io::OrderedJson& j, std::size_t line) {
    try {
      WeakLabel l;
      l.example_id = j.at("example_id").get<std::string>();
      l.bsq_id = j.at("bsq_id").get<std::string>();
      l.answer = answer_from_string(j.at("answer").get<std::string>());
      l.mode = label_mode_from_string(j.value("mode", "direct"));
      l.raw_hash = j.value("raw_hash", "");
      out.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  check_unique(out);
  return out;
}

void save_failures(const std::string& path,
                   const std::vector<ExtractionFailure>& failures) {
  std::string out;
  for (const auto& f : failures) {
    io::OrderedJson j;
    j["example_id"] = f.example_id;
    j["bsq_id"] = f.bsq_id;
    j["raw"] = f.raw;
    out += j.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

}  // namespace nllf::weak
