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

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace nllf::nn {

/// Model input for one sequence (or sequence pair). All vectors have the
/// same length.
struct EncodedInput {
  std::vector<int> words;
  std::vector<std::vector<int>> subwords;  // hashed character trigrams
  std::vector<int> segments;               // 0 = first sequence, 1 = second
  std::vector<int> matches;  // 1 when the word also occurs in the other side

  std::size_t size() const { return words.size(); }
};

struct TokenizerConfig {
  std::size_t max_vocab = 8000;
  std::size_t min_count = 1;
  int hash_buckets = 1024;
  int max_length = 512;
};

/// Word-level tokenizer with hashed trigram subwords so unseen words still
/// get a content-bearing embedding. Pairs are laid out as
/// [CLS] premise [SEP] hypothesis [SEP].
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  Tokenizer() = default;
  static Tokenizer fit(std::span<const std::string> texts,
                       const TokenizerConfig& config);

  /// Truncates the premise tail when the pair exceeds max_length and sets
  /// *truncated. Throws InputError if the hypothesis alone cannot fit.
  EncodedInput encode_pair(const std::string& premise,
                           const std::string& hypothesis,
                           bool* truncated = nullptr) const;
  EncodedInput encode_single(const std::string& text,
                             bool* truncated = nullptr) const;

  int vocab_size() const { return static_cast<int>(words_.size()); }
  int hash_buckets() const { return config_.hash_buckets; }
  int max_length() const { return config_.max_length; }
  int word_id(const std::string& word) const;

  std::string serialize() const;
  static Tokenizer deserialize(const std::string& text);

 private:
  std::vector<int> trigram_buckets(const std::string& word) const;

  TokenizerConfig config_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace nllf::nn
