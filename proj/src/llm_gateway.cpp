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

#include "nllf/llm_gateway.hpp"

#include <algorithm>
#include <filesystem>
#include <thread>

namespace nllf::llm {

std::string to_string(Role role) {
  switch (role) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view text) {
  if (text == "system") return Role::system;
  if (text == "user") return Role::user;
  if (text == "assistant") return Role::assistant;
  throw TemplateError("unknown role '" + std::string(text) + "'");
}

namespace {

bool is_name_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_name_char(char c) {
  return is_name_start(c) || (c >= '0' && c <= '9');
}

// Walks `text`, calling on_literal for plain runs and on_placeholder for
// each {name}. Throws TemplateError on malformed braces.
template <typename Literal, typename Placeholder>
void scan_template(const std::string& text, const std::string& where,
                   Literal on_literal, Placeholder on_placeholder) {
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '{') {
      if (i + 1 < text.size() && text[i + 1] == '{') {
        on_literal("{");
        i += 2;
        continue;
      }
      const std::size_t close = text.find('}', i + 1);
      if (close == std::string::npos) {
        throw TemplateError(where + ": unterminated '{'");
      }
      const std::string name = text.substr(i + 1, close - i - 1);
      if (name.empty() || !is_name_start(name[0]) ||
          !std::all_of(name.begin(), name.end(), is_name_char)) {
        throw TemplateError(where + ": invalid placeholder '{" + name + "}'");
      }
      on_placeholder(name);
      i = close + 1;
    } else if (c == '}') {
      if (i + 1 < text.size() && text[i + 1] == '}') {
        on_literal("}");
        i += 2;
        continue;
      }
      throw TemplateError(where + ": unbalanced '}'");
    } else {
      const std::size_t next = text.find_first_of("{}", i);
      const std::size_t end = next == std::string::npos ? text.size() : next;
      on_literal(std::string_view(text).substr(i, end - i));
      i = end;
    }
  }
}

}  // namespace

void PromptTemplate::validate() const {
  for (std::size_t m = 0; m < messages.size(); ++m) {
    const std::string where =
        "template '" + name + "' message " + std::to_string(m);
    scan_template(
        messages[m].text, where, [](std::string_view) {},
        [&](const std::string& placeholder) {
          if (std::find(placeholders.begin(), placeholders.end(),
                        placeholder) == placeholders.end()) {
            throw TemplateError(where + ": undeclared placeholder '" +
                                placeholder + "'");
          }
        });
  }
}

PromptTemplate PromptTemplate::from_json(const io::Json& j) {
  PromptTemplate t;
  try {
    t.name = j.value("name", "");
    for (const auto& m : j.at("messages")) {
      t.messages.push_back(
          {role_from_string(m.at("role").get<std::string>()),
           m.at("text").get<std::string>()});
    }
    if (j.contains("placeholders")) {
      t.placeholders = j["placeholders"].get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw TemplateError("template '" + t.name + "': " + e.what());
  }
  t.validate();
  return t;
}

io::Json PromptTemplate::to_json() const {
  io::Json j;
  j["name"] = name;
  j["placeholders"] = placeholders;
  j["messages"] = io::Json::array();
  for (const auto& m : messages) {
    j["messages"].push_back({{"role", to_string(m.role)}, {"text", m.text}});
  }
  return j;
}

Messages render(const PromptTemplate& tmpl, const Bindings& bindings) {
  std::set<std::string> used;
  Messages out;
  out.reserve(tmpl.messages.size());
  for (std::size_t m = 0; m < tmpl.messages.size(); ++m) {
    std::string text;
    scan_template(
        tmpl.messages[m].text,
        "template '" + tmpl.name + "' message " + std::to_string(m),
        [&](std::string_view literal) { text.append(literal); },
        [&](const std::string& name) {
          auto it = bindings.find(name);
          if (it == bindings.end()) {
            throw TemplateError("template '" + tmpl.name +
                                "': missing binding for placeholder '" +
                                name + "'");
          }
          used.insert(name);
          text.append(it->second);
        });
    out.push_back({tmpl.messages[m].role, std::move(text)});
  }
  for (const auto& [name, value] : bindings) {
    if (!used.count(name)) {
      warn("template '" + tmpl.name + "': binding '" + name +
           "' is not used by any placeholder");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scripted mock

ScriptedMockBackend::ScriptedMockBackend(const io::Json& config) {
  default_reply_ = config.value("default", "I cannot answer that.");
  if (!config.contains("rules")) return;
  for (const auto& r : config.at("rules")) {
    Rule rule;
    if (r.contains("keyword_qa")) {
      const auto& q = r["keyword_qa"];
      rule.kind = Rule::Kind::keyword_qa;
      rule.text_marker = to_lower_ascii(q.value("text_marker", "text:"));
      rule.question_marker =
          to_lower_ascii(q.value("question_marker", "question:"));
      rule.end_marker = to_lower_ascii(q.value("end_marker", "\n"));
      rule.yes_reply = q.value("yes", "Yes.");
      rule.no_reply = q.value("no", "No.");
      rule.noise = q.value("noise", 0.0);
      for (const auto& p : q.at("pairs")) {
        std::vector<std::string> needles;
        for (const auto& t : p.at("text")) {
          needles.push_back(to_lower_ascii(t.get<std::string>()));
        }
        rule.pairs.emplace_back(
            to_lower_ascii(p.at("question").get<std::string>()),
            std::move(needles));
      }
    } else {
      rule.kind = Rule::Kind::contains;
      for (const auto& n : r.at("when_contains")) {
        rule.needles.push_back(to_lower_ascii(n.get<std::string>()));
      }
      rule.reply = r.at("reply").get<std::string>();
    }
    rules_.push_back(std::move(rule));
  }
}

std::string ScriptedMockBackend::complete(const Messages& messages,
                                          const CompletionParams&) {
  std::string last_user;
  std::string everything;
  for (const auto& m : messages) {
    everything += to_string(m.role) + "\n" + m.text + "\n";
    if (m.role == Role::user) last_user = m.text;
  }
  const std::string lowered = to_lower_ascii(last_user);

  for (const auto& rule : rules_) {
    if (rule.kind == Rule::Kind::contains) {
      const bool all = std::all_of(
          rule.needles.begin(), rule.needles.end(),
          [&](const std::string& n) { return lowered.find(n) != std::string::npos; });
      if (all) return rule.reply;
      continue;
    }
    const auto t = lowered.find(rule.text_marker);
    const auto q = lowered.find(rule.question_marker);
    if (t == std::string::npos || q == std::string::npos) continue;
    const std::size_t text_begin = t + rule.text_marker.size();
    const std::string text_segment =
        q > text_begin ? lowered.substr(text_begin, q - text_begin)
                       : lowered.substr(text_begin);
    const std::size_t q_begin = q + rule.question_marker.size();
    std::size_t q_end = lowered.find(rule.end_marker, q_begin);
    if (q_end == std::string::npos) q_end = lowered.size();
    const std::string question = lowered.substr(q_begin, q_end - q_begin);

    for (const auto& [question_key, text_keys] : rule.pairs) {
      if (question.find(question_key) == std::string::npos) continue;
      bool yes = std::any_of(text_keys.begin(), text_keys.end(),
                             [&](const std::string& k) {
                               return text_segment.find(k) != std::string::npos;
                             });
      if (rule.noise > 0.0) {
        const std::string digest = sha256_hex(everything);
        const double u =
            static_cast<double>(std::stoull(digest.substr(0, 13), nullptr, 16)) /
            static_cast<double>(1ULL << 52);
        if (u < rule.noise) yes = !yes;
      }
      return yes ? rule.yes_reply : rule.no_reply;
    }
  }
  return default_reply_;
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string ResponseCache::path_for(const std::string& key) const {
  return (std::filesystem::path(dir_) / (key + ".json")).string();
}

std::optional<LLMResponse> ResponseCache::get(const std::string& key) const {
  {
    std::lock_guard lock(*mutex_);
    auto it = memory_.find(key);
    if (it != memory_.end()) return it->second;
  }
  if (dir_.empty()) return std::nullopt;
  const std::string path = path_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  const auto j = io::Json::parse(read_file(path));
  LLMResponse r;
  r.text = j.at("text").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.latency_ms = j.value("latency_ms", 0.0);
  std::lock_guard lock(*mutex_);
  memory_.emplace(key, r);
  return r;
}

bool ResponseCache::contains(const std::string& key) const {
  {
    std::lock_guard lock(*mutex_);
    if (memory_.count(key)) return true;
  }
  return !dir_.empty() && std::filesystem::exists(path_for(key));
}

void ResponseCache::put(const std::string& key, const LLMResponse& response) {
  std::lock_guard lock(*mutex_);
  memory_[key] = response;
  if (dir_.empty()) return;
  io::Json j;
  j["model_id"] = response.model_id;
  j["text"] = response.text;
  j["latency_ms"] = response.latency_ms;
  // Write-then-rename so a crash never leaves a truncated entry.
  const std::string path = path_for(key);
  const std::string tmp = path + ".tmp";
  write_file(tmp, j.dump());
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<Backend> backend, ResponseCache cache,
                 RetryPolicy retry, std::size_t max_in_flight)
    : backend_(std::move(backend)),
      cache_(std::move(cache)),
      retry_(retry),
      max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {
  if (retry_.max_attempts < 1) retry_.max_attempts = 1;
}

std::string Gateway::cache_key(const Messages& messages,
                               const CompletionParams& params) {
  io::OrderedJson j;
  j["model_id"] = params.model_id;
  j["temperature"] = params.temperature;
  j["max_tokens"] = params.max_tokens;
  j["messages"] = io::OrderedJson::array();
  for (const auto& m : messages) {
    j["messages"].push_back({{"role", to_string(m.role)}, {"text", m.text}});
  }
  return sha256_hex(j.dump());
}

std::shared_ptr<std::mutex> Gateway::key_mutex(const std::string& key) {
  std::lock_guard lock(state_mutex_);
  auto& slot = key_mutexes_[key];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

std::string Gateway::call_with_retry(const Messages& messages,
                                     const CompletionParams& params) {
  std::string last_error;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    {
      std::lock_guard lock(state_mutex_);
      ++backend_attempts_;
    }
    try {
      return backend_->complete(messages, params);
    } catch (const RateLimited& e) {
      last_error = e.what();
      if (attempt < retry_.max_attempts) {
        const auto backoff = retry_.base_delay * (1 << (attempt - 1));
        std::this_thread::sleep_for(std::max(backoff, e.retry_after));
      }
    } catch (const BackendFailure& e) {
      last_error = e.what();
      if (attempt < retry_.max_attempts) {
        std::this_thread::sleep_for(retry_.base_delay * (1 << (attempt - 1)));
      }
    }
  }
  throw TransportError("LLM backend failed after " +
                           std::to_string(retry_.max_attempts) +
                           " attempts: " + last_error,
                       retry_.max_attempts);
}

LLMResponse Gateway::complete(const Messages& messages,
                              const CompletionParams& params) {
  if (messages.empty()) throw InputError("completion request has no messages");
  const std::string key = cache_key(messages, params);
  {
    std::lock_guard lock(state_mutex_);
    touched_.insert(key);
  }
  auto guard = key_mutex(key);
  std::lock_guard key_lock(*guard);

  if (auto hit = cache_.get(key)) {
    std::lock_guard lock(state_mutex_);
    ++cache_hits_;
    hit->cached = true;
    return *hit;
  }
  const auto start = std::chrono::steady_clock::now();
  LLMResponse response;
  response.text = call_with_retry(messages, params);
  response.model_id = params.model_id;
  response.latency_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - start)
          .count();
  cache_.put(key, response);
  {
    std::lock_guard lock(state_mutex_);
    ++backend_calls_;
  }
  return response;
}

std::vector<LLMResponse> Gateway::complete_all(
    const std::vector<Messages>& requests, const CompletionParams& params) {
  std::vector<LLMResponse> out(requests.size());
  if (requests.empty()) return out;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        out[i] = complete(requests[i], params);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = requests.size();
        return;
      }
    }
  };
  const std::size_t n_workers = std::min(max_in_flight_, requests.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

bool Gateway::is_cached(const Messages& messages,
                        const CompletionParams& params) const {
  return cache_.contains(cache_key(messages, params));
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(state_mutex_);
  return GatewayStats{backend_calls_, backend_attempts_, cache_hits_,
                      touched_.size()};
}

std::shared_ptr<Backend> make_backend(const io::Json& config) {
  const std::string kind = config.value("backend", "mock");
  if (kind == "mock") {
    return std::make_shared<ScriptedMockBackend>(
        config.value("mock", io::Json::object()));
  }
  if (kind == "hosted") {
    HostedBackend::Options opts;
    const auto hosted = config.value("hosted", io::Json::object());
    opts.base_url = hosted.value("base_url", opts.base_url);
    opts.path = hosted.value("path", opts.path);
    opts.api_key_env = hosted.value("api_key_env", opts.api_key_env);
    opts.timeout_seconds = hosted.value("timeout_seconds", opts.timeout_seconds);
    return std::make_shared<HostedBackend>(std::move(opts));
  }
  throw ConfigError("unknown LLM backend '" + kind + "'");
}

}  // namespace nllf::llm
