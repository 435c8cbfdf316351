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

#include "nllf/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_set>

#include "nllf/common.hpp"

namespace nllf::nn {

namespace {

const char* const kSpecials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Tokenizer Tokenizer::fit(std::span<const std::string> texts,
                         const TokenizerConfig& config) {
  if (config.hash_buckets < 1 || config.max_length < 4) {
    throw ConfigError("tokenizer needs hash_buckets >= 1 and max_length >= 4");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : word_tokens(t)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  // Most frequent first; ties alphabetical (map order is preserved by
  // stable_sort).
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Tokenizer tok;
  tok.config_ = config;
  for (const char* s : kSpecials) {
    tok.index_[s] = static_cast<int>(tok.words_.size());
    tok.words_.emplace_back(s);
  }
  for (const auto& [word, count] : ranked) {
    if (tok.words_.size() >= config.max_vocab + 4) break;
    if (count < config.min_count) continue;
    tok.index_[word] = static_cast<int>(tok.words_.size());
    tok.words_.push_back(word);
  }
  return tok;
}

int Tokenizer::word_id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Tokenizer::trigram_buckets(const std::string& word) const {
  const std::string padded = "<" + word + ">";
  std::vector<int> out;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    out.push_back(static_cast<int>(
        fnv1a(std::string_view(padded).substr(i, 3)) %
        static_cast<std::uint64_t>(config_.hash_buckets)));
  }
  return out;
}

EncodedInput Tokenizer::encode_pair(const std::string& premise,
                                    const std::string& hypothesis,
                                    bool* truncated) const {
  auto p = word_tokens(premise);
  const auto h = word_tokens(hypothesis);
  const std::size_t budget = static_cast<std::size_t>(config_.max_length);
  if (h.size() + 3 > budget) {
    throw InputError("hypothesis of " + std::to_string(h.size()) +
                     " tokens does not fit max_length " +
                     std::to_string(config_.max_length));
  }
  const bool cut = p.size() + h.size() + 3 > budget;
  if (cut) p.resize(budget - h.size() - 3);
  if (truncated) *truncated = cut;

  const std::unordered_set<std::string> p_set(p.begin(), p.end());
  const std::unordered_set<std::string> h_set(h.begin(), h.end());

  EncodedInput in;
  auto push = [&](int id, std::vector<int> subwords, int segment, int match) {
    in.words.push_back(id);
    in.subwords.push_back(std::move(subwords));
    in.segments.push_back(segment);
    in.matches.push_back(match);
  };
  push(kCls, {}, 0, 0);
  for (const auto& w : p) push(word_id(w), trigram_buckets(w), 0, h_set.count(w) ? 1 : 0);
  push(kSep, {}, 0, 0);
  for (const auto& w : h) push(word_id(w), trigram_buckets(w), 1, p_set.count(w) ? 1 : 0);
  push(kSep, {}, 1, 0);
  return in;
}

EncodedInput Tokenizer::encode_single(const std::string& text,
                                      bool* truncated) const {
  auto t = word_tokens(text);
  const std::size_t budget = static_cast<std::size_t>(config_.max_length);
  const bool cut = t.size() + 2 > budget;
  if (cut) t.resize(budget - 2);
  if (truncated) *truncated = cut;
  EncodedInput in;
  auto push = [&](int id, std::vector<int> subwords) {
    in.words.push_back(id);
    in.subwords.push_back(std::move(subwords));
    in.segments.push_back(0);
    in.matches.push_back(0);
  };
  push(kCls, {});
  for (const auto& w : t) push(word_id(w), trigram_buckets(w));
  push(kSep, {});
  return in;
}

std::string Tokenizer::serialize() const {
  std::ostringstream out;
  out << "nllf-vocab 1 " << config_.hash_buckets << ' ' << config_.max_length
      << ' ' << config_.max_vocab << ' ' << config_.min_count << '\n';
  for (const auto& w : words_) out << w << '\n';
  return out.str();
}

Tokenizer Tokenizer::deserialize(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("empty vocabulary file");
  std::istringstream header(lines[0]);
  std::string magic;
  int version = 0;
  Tokenizer tok;
  header >> magic >> version >> tok.config_.hash_buckets >>
      tok.config_.max_length >> tok.config_.max_vocab >> tok.config_.min_count;
  if (magic != "nllf-vocab" || version != 1 || !header) {
    throw ParseError("unrecognized vocabulary header '" + lines[0] + "'");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    tok.index_[lines[i]] = static_cast<int>(tok.words_.size());
    tok.words_.push_back(lines[i]);
  }
  if (tok.words_.size() < 4 || tok.words_[kCls] != "[CLS]") {
    throw ParseError("vocabulary is missing its special tokens");
  }
  return tok;
}

}  // namespace nllf::nn
