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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>

#include "nllf/llm_gateway.hpp"

namespace nllf::llm {

HostedBackend::HostedBackend(Options options) : options_(std::move(options)) {
  if (const char* key = std::getenv(options_.api_key_env.c_str())) {
    api_key_ = key;
  }
}

std::string HostedBackend::complete(const Messages& messages,
                                    const CompletionParams& params) {
  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout_seconds, 0);
  client.set_read_timeout(options_.timeout_seconds, 0);

  io::Json body;
  body["model"] = params.model_id;
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  body["messages"] = io::Json::array();
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.text}});
  }

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto result = client.Post(options_.path, headers, body.dump(), "application/json");
  if (!result) {
    throw BackendFailure("connection to " + options_.base_url + " failed: " +
                         httplib::to_string(result.error()));
  }
  if (result->status == 429) {
    std::chrono::milliseconds retry_after{1000};
    if (result->has_header("Retry-After")) {
      try {
        retry_after = std::chrono::milliseconds(
            static_cast<long>(std::stod(result->get_header_value("Retry-After")) * 1000));
      } catch (const std::exception&) {
      }
    }
    throw RateLimited("rate limited by " + options_.base_url, retry_after);
  }
  if (result->status >= 500) {
    throw BackendFailure("server error " + std::to_string(result->status));
  }
  if (result->status != 200) {
    // Client errors will not improve on retry.
    throw TransportError("request rejected with status " +
                             std::to_string(result->status) + ": " + result->body,
                         1);
  }
  try {
    const auto j = io::Json::parse(result->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendFailure(std::string("unreadable completion payload: ") + e.what());
  }
}

}  // namespace nllf::llm
