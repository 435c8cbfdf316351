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


#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "nllf/llm_gateway.hpp"
#include "test_util.hpp"

using namespace nllf;
using namespace nllf::llm;

namespace {

PromptTemplate load_template(const std::string& name) {
  return PromptTemplate::from_json(io::Json::parse(read_file(testing::source_path("data/templates/" + name))));
}

Gateway memory_gateway(std::shared_ptr<Backend> backend, int attempts = 3) {
  RetryPolicy retry;
  retry.max_attempts = attempts;
  retry.base_delay = std::chrono::milliseconds(1);
  return Gateway(std::move(backend), ResponseCache{}, retry, 2);
}

Messages user(const std::string& text) { return {{Role::user, text}}; }

}  // namespace

TEST_CASE("rendering keeps the bound text verbatim") {
  const auto tmpl = load_template("bsq_generation.json");
  const std::string abstract = "Intercropping {maize} with legumes reduced N2O by 12% (p < 0.05).";
  const auto msgs = render(tmpl, {{"text", abstract}});
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[1].text.find(abstract) != std::string::npos);
  CHECK(msgs[0].role == Role::system);
}

TEST_CASE("rendering without placeholders is the identity") {
  PromptTemplate t;
  t.name = "plain";
  t.messages = {{Role::user, "Say hello with {{braces}}."}};
  const auto msgs = render(t, {});
  CHECK(msgs[0].text == "Say hello with {braces}.");
}

TEST_CASE("rendering reports missing and unused bindings") {
  const auto tmpl = load_template("weak_label_direct.json");
  try {
    render(tmpl, {{"text", "abc"}});
    FAIL("expected a template error");
  } catch (const TemplateError& e) {
    CHECK(std::string(e.what()).find("question") != std::string::npos);
  }
  std::vector<std::string> warnings;
  auto old = set_warning_handler([&](const std::string& w) { warnings.push_back(w); });
  const auto msgs = render(tmpl, {{"text", "abc"}, {"question", "Q?"}, {"extra", "unused"}});
  set_warning_handler(old);
  CHECK(msgs[1].text.find("Q?") != std::string::npos);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("extra") != std::string::npos);
}

TEST_CASE("templates validate their placeholders and braces") {
  PromptTemplate t;
  t.messages = {{Role::user, "Hello {name}"}};
  CHECK_THROWS_AS(t.validate(), TemplateError);
  t.placeholders = {"name"};
  CHECK_NOTHROW(t.validate());
  t.messages = {{Role::user, "Hello {name"}};
  CHECK_THROWS_AS(t.validate(), TemplateError);
}

TEST_CASE("second identical request is served from the cache") {
  std::atomic<int> calls{0};
  auto backend = std::make_shared<FunctionBackend>([&](const Messages& m) {
    ++calls;
    return "echo " + m.back().text;
  });
  auto gw = memory_gateway(backend);
  const auto a = gw.complete(user("ping"), {});
  const auto b = gw.complete(user("ping"), {});
  CHECK_FALSE(a.cached);
  CHECK(b.cached);
  CHECK(a.text == b.text);
  CHECK(calls == 1);
  CHECK(gw.stats().backend_calls == 1);
  CHECK(gw.stats().cache_hits == 1);
}

TEST_CASE("cache keys depend on messages and parameters") {
  CompletionParams p;
  const auto k1 = Gateway::cache_key(user("a"), p);
  CHECK(k1 == Gateway::cache_key(user("a"), p));
  CHECK(k1 != Gateway::cache_key(user("b"), p));
  p.temperature = 0.7;
  CHECK(k1 != Gateway::cache_key(user("a"), p));
}

TEST_CASE("on-disk cache survives a new gateway") {
  const auto dir = testing::scratch_dir("llm_cache");
  std::atomic<int> calls{0};
  auto backend = std::make_shared<FunctionBackend>([&](const Messages&) {
    ++calls;
    return std::string("Yes.");
  });
  {
    Gateway gw(backend, ResponseCache(dir));
    gw.complete(user("q"), {});
  }
  Gateway again(backend, ResponseCache(dir));
  CHECK(again.is_cached(user("q"), {}));
  CHECK(again.complete(user("q"), {}).cached);
  CHECK(calls == 1);
}

TEST_CASE("scripted mock answers by substring rule") {
  io::Json cfg = {{"default", "No."},
                  {"rules", {{{"when_contains", {"agroecolog"}}, {"reply", "Yes."}}}}};
  auto gw = memory_gateway(std::make_shared<ScriptedMockBackend>(cfg));
  CHECK(gw.complete(user("An agroecological trial in Chile."), {}).text == "Yes.");
  CHECK(gw.complete(user("A survey of tractor fuel use."), {}).text == "No.");
  CHECK(gw.complete(user("AGROECOLOGY at scale."), {}).text == "Yes.");
}

TEST_CASE("three failures with a budget of three raise a transport error") {
  std::atomic<int> calls{0};
  auto backend = std::make_shared<FunctionBackend>([&](const Messages&) -> std::string {
    ++calls;
    throw BackendFailure("boom");
  });
  auto gw = memory_gateway(backend, 3);
  try {
    gw.complete(user("x"), {});
    FAIL("expected a transport error");
  } catch (const TransportError& e) {
    CHECK(e.attempts == 3);
  }
  CHECK(calls == 3);
}

TEST_CASE("transient failures are retried") {
  std::atomic<int> calls{0};
  auto backend = std::make_shared<FunctionBackend>([&](const Messages&) -> std::string {
    if (++calls < 3) throw RateLimited("slow down", std::chrono::milliseconds(1));
    return "ok";
  });
  auto gw = memory_gateway(backend, 3);
  CHECK(gw.complete(user("x"), {}).text == "ok");
  CHECK(gw.stats().backend_attempts == 3);
  CHECK(gw.stats().backend_calls == 1);
}

TEST_CASE("complete_all keeps input order") {
  auto backend = std::make_shared<FunctionBackend>([](const Messages& m) { return m.back().text + "!"; });
  auto gw = memory_gateway(backend);
  std::vector<Messages> reqs;
  for (int i = 0; i < 20; ++i) reqs.push_back(user("r" + std::to_string(i)));
  reqs.push_back(user("r3"));
  const auto out = gw.complete_all(reqs, {});
  REQUIRE(out.size() == 21);
  for (int i = 0; i < 20; ++i) CHECK(out[i].text == "r" + std::to_string(i) + "!");
  CHECK(out[20].text == "r3!");
}

TEST_CASE("hosted backend talks to an OpenAI-style endpoint") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  io::Json seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_auth = req.get_header_value("Authorization");
    seen_body = io::Json::parse(req.body);
    if (hits == 1) {
      res.status = 503;
      return;
    }
    io::Json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "Yes."}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("NLLF_TEST_KEY", "secret", 1);
  HostedBackend::Options opts;
  opts.base_url = "http://127.0.0.1:" + std::to_string(port);
  opts.api_key_env = "NLLF_TEST_KEY";
  opts.timeout_seconds = 5;
  auto gw = memory_gateway(std::make_shared<HostedBackend>(opts), 3);
  CompletionParams params;
  params.model_id = "test-model";
  const auto r = gw.complete({{Role::system, "sys"}, {Role::user, "Is it?"}}, params);

  server.stop();
  worker.join();
  CHECK(r.text == "Yes.");
  CHECK(hits == 2);
  CHECK(seen_auth == "Bearer secret");
  CHECK(seen_body["model"] == "test-model");
  CHECK(seen_body["messages"].size() == 2);
  CHECK(seen_body["messages"][1]["content"] == "Is it?");
}

TEST_CASE("hosted backend does not retry client errors") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  HostedBackend::Options opts;
  opts.base_url = "http://127.0.0.1:" + std::to_string(port);
  opts.api_key_env = "NLLF_UNSET_KEY_FOR_TESTS";
  auto gw = memory_gateway(std::make_shared<HostedBackend>(opts), 3);
  CHECK_THROWS_AS(gw.complete(user("x"), {}), TransportError);
  server.stop();
  worker.join();
  CHECK(hits == 1);
}
