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

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nllf/common.hpp"
#include "nllf/io.hpp"

namespace nllf::llm {

enum class Role { system, user, assistant };

std::string to_string(Role role);
Role role_from_string(std::string_view text);

struct Message {
  Role role;
  std::string text;
  friend bool operator==(const Message&, const Message&) = default;
};

using Messages = std::vector<Message>;
using Bindings = std::map<std::string, std::string>;

/// Role-structured chat template. Placeholders are written `{name}`;
/// `{{` and `}}` produce literal braces.
struct PromptTemplate {
  std::string name;
  Messages messages;
  std::vector<std::string> placeholders;

  /// Throws TemplateError when the text uses an undeclared placeholder or
  /// has an unbalanced brace.
  void validate() const;

  static PromptTemplate from_json(const io::Json& j);
  io::Json to_json() const;
};

/// Substitutes bindings verbatim. A missing binding throws TemplateError
/// naming the placeholder; unused bindings are reported via warn().
Messages render(const PromptTemplate& tmpl, const Bindings& bindings);

struct CompletionParams {
  double temperature = 0.0;
  int max_tokens = 512;
  std::string model_id = "mock";
};

struct LLMResponse {
  std::string text;
  std::string model_id;
  bool cached = false;
  double latency_ms = 0.0;
};

/// Thrown by backends for failures worth retrying.
struct BackendFailure : Error {
  using Error::Error;
};

/// Thrown by backends when the provider asks the caller to slow down.
struct RateLimited : BackendFailure {
  RateLimited(const std::string& what, std::chrono::milliseconds retry_after)
      : BackendFailure(what), retry_after(retry_after) {}
  std::chrono::milliseconds retry_after;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const Messages& messages,
                               const CompletionParams& params) = 0;
};

/// Wraps a pure function of the rendered messages.
class FunctionBackend : public Backend {
 public:
  using Fn = std::function<std::string(const Messages&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const Messages& messages,
                       const CompletionParams&) override {
    return fn_(messages);
  }

 private:
  Fn fn_;
};

/// Rule-driven mock configured from JSON (see README for the schema).
/// Pure: the reply depends only on the rendered messages.
class ScriptedMockBackend : public Backend {
 public:
  explicit ScriptedMockBackend(const io::Json& config);
  std::string complete(const Messages& messages,
                       const CompletionParams& params) override;

 private:
  struct Rule {
    enum class Kind { contains, keyword_qa } kind;
    std::vector<std::string> needles;  // contains: all must appear
    std::string reply;
    // keyword_qa
    std::string text_marker;
    std::string question_marker;
    std::string end_marker;
    std::vector<std::pair<std::string, std::vector<std::string>>> pairs;
    std::string yes_reply;
    std::string no_reply;
    double noise = 0.0;
  };
  std::vector<Rule> rules_;
  std::string default_reply_;
};

/// OpenAI-compatible chat-completions endpoint.
class HostedBackend : public Backend {
 public:
  struct Options {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 60;
  };
  explicit HostedBackend(Options options);
  std::string complete(const Messages& messages,
                       const CompletionParams& params) override;

 private:
  Options options_;
  std::string api_key_;
};

/// Content-addressed response store: one JSON file per key under `dir`.
/// An empty dir keeps everything in memory.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir = {});

  std::optional<LLMResponse> get(const std::string& key) const;
  void put(const std::string& key, const LLMResponse& response);
  bool contains(const std::string& key) const;
  const std::string& dir() const { return dir_; }

 private:
  std::string path_for(const std::string& key) const;

  std::string dir_;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
  mutable std::map<std::string, LLMResponse> memory_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
};

struct GatewayStats {
  std::size_t backend_calls = 0;   // successful non-cached completions
  std::size_t backend_attempts = 0;
  std::size_t cache_hits = 0;
  std::size_t distinct_keys = 0;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, ResponseCache cache,
          RetryPolicy retry = {}, std::size_t max_in_flight = 4);

  static std::string cache_key(const Messages& messages,
                               const CompletionParams& params);

  LLMResponse complete(const Messages& messages,
                       const CompletionParams& params);

  /// Issues requests concurrently (bounded by max_in_flight); results keep
  /// input order.
  std::vector<LLMResponse> complete_all(const std::vector<Messages>& requests,
                                        const CompletionParams& params);

  bool is_cached(const Messages& messages,
                 const CompletionParams& params) const;
  GatewayStats stats() const;

 private:
  std::shared_ptr<std::mutex> key_mutex(const std::string& key);
  std::string call_with_retry(const Messages& messages,
                              const CompletionParams& params);

  std::shared_ptr<Backend> backend_;
  ResponseCache cache_;
  RetryPolicy retry_;
  std::size_t max_in_flight_;

  mutable std::mutex state_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> key_mutexes_;
  std::set<std::string> touched_;
  std::size_t backend_calls_ = 0;
  std::size_t backend_attempts_ = 0;
  std::size_t cache_hits_ = 0;
};

/// Builds a gateway from the `llm` config section:
/// {backend: mock|hosted, model_id, cache_dir, mock: {...}, hosted: {...}}.
std::shared_ptr<Backend> make_backend(const io::Json& config);

}  // namespace nllf::llm
