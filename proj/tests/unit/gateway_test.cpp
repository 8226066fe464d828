#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <mutex>
#include <random>
#include <set>

#include "lensloop/error.hpp"
#include "lensloop/gateway.hpp"
#include "test_support.hpp"

namespace lensloop {
namespace {

using testing::always;
using testing::chat_reply;
using testing::contains;
using testing::quiet_gateway;
using testing::scripted;
using testing::StubServer;
using testing::TempDir;

ChatRequest req(std::string user, std::string backend = "b") {
  return ChatRequest{"sys", std::move(user), 0.0, 64, std::move(backend)};
}

TEST(ScriptedBackend, PriorityThenInsertionOrderOverAllAssignments) {
  // Three rules that all match; every priority assignment in {0,1,2}^3 must
  // fire the rule with the smallest (priority, index).
  for (int code = 0; code < 27; ++code) {
    const int p[3] = {code % 3, (code / 3) % 3, code / 9};
    std::vector<ScriptedRule> rules;
    for (int i = 0; i < 3; ++i) rules.push_back(contains("needle", "r" + std::to_string(i), p[i]));
    const ScriptedBackend backend(rules);
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (p[i] < p[best]) best = i;
    }
    EXPECT_EQ(backend.firing_rule("hay needle hay"), static_cast<std::size_t>(best)) << p[0] << p[1] << p[2];
  }
}

TEST(ScriptedBackend, MatchKinds) {
  auto backend = scripted({contains("apple", "fruit", 1),
                           ScriptedRule{ScriptedRule::Match::Regex, "step [0-9]+ of", "numbered", 2},
                           always("fallback", 3)});
  EXPECT_EQ(backend->complete(req("an apple")), "fruit");
  EXPECT_EQ(backend->complete(req("this is step 12 of 20")), "numbered");
  EXPECT_EQ(backend->complete(req("nothing")), "fallback");
  // The matched text is system + "\n" + user.
  EXPECT_EQ(backend->complete(ChatRequest{"apple", "x", 0, 1, "b"}), "fruit");
}

TEST(ScriptedBackend, NoMatchIsResponseEmpty) {
  auto backend = scripted({contains("zzz", "never")});
  try {
    backend->complete(req("abc"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResponseEmpty);
  }
}

TEST(ScriptedBackend, FromJson) {
  const auto backend = ScriptedBackend::from_json(nlohmann::json::parse(
      R"([{"match":"always","response":"late","priority":5},{"match":"contains","pattern":"x","response":"early"}])"));
  EXPECT_EQ(backend->complete(req("x")), "early");
  EXPECT_EQ(backend->complete(req("y")), "late");
  EXPECT_THROW(ScriptedBackend::from_json(nlohmann::json::parse(R"([{"match":"fuzzy","response":"a"}])")), Error);
  EXPECT_THROW(ScriptedBackend::from_json(nlohmann::json::parse(R"([{"match":"regex","pattern":"(","response":"a"}])")),
               Error);
}

TEST(Gateway, CompleteManyKeepsSlotsAndErrors) {
  Gateway gw(quiet_gateway());
  gw.register_backend("b", scripted({contains("ok", "fine"), contains("empty", "")}));
  const auto out = gw.complete_many({req("ok"), req("none"), req("ok", "missing"), req("empty")});
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].value(), "fine");
  ASSERT_FALSE(out[1].ok());
  EXPECT_EQ(out[1].error->code(), ErrorCode::ResponseEmpty);
  EXPECT_EQ(out[2].error->code(), ErrorCode::BackendUnknown);
  EXPECT_EQ(out[3].error->code(), ErrorCode::ResponseEmpty);
  const auto transcript = gw.transcript();
  ASSERT_EQ(transcript.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(transcript[i].seq, i);
  EXPECT_EQ(transcript[0].response, "fine");
  EXPECT_FALSE(transcript[2].error.empty());
}

TEST(Gateway, InputTooLarge) {
  GatewayOptions options = quiet_gateway();
  options.max_input_bytes = 10;
  Gateway gw(options);
  gw.register_backend("b", scripted({always("x")}));
  try {
    gw.complete(req("this is longer than ten bytes"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InputTooLarge);
  }
}

TEST(Gateway, TranscriptFileHasOneLinePerCall) {
  TempDir dir;
  {
    Gateway gw(quiet_gateway(dir / "t.jsonl"));
    gw.register_backend("b", scripted({always("resp")}));
    gw.complete(req("one"));
    gw.complete_many({req("two"), req("three")});
  }
  std::istringstream lines(testing::slurp(dir / "t.jsonl"));
  std::vector<std::string> users;
  for (std::string line; std::getline(lines, line);) users.push_back(nlohmann::json::parse(line)["user"]);
  EXPECT_EQ(users, (std::vector<std::string>{"one", "two", "three"}));
}

TEST(RemoteBackend, ConcurrentRequestsComeBackInOrder) {
  std::mutex mu;
  std::set<std::string> auth;
  std::mt19937 rng(5);
  StubServer server([&](const httplib::Request& r, httplib::Response& res) {
    int delay = 0;
    {
      std::lock_guard lock(mu);
      auth.insert(r.get_header_value("Authorization"));
      delay = std::uniform_int_distribution<int>(0, 40)(rng);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    const auto body = nlohmann::json::parse(r.body);
    EXPECT_EQ(r.path, "/v1/chat/completions");
    EXPECT_EQ(body["model"], "m");
    res.set_content(chat_reply("echo:" + body["messages"][1]["content"].get<std::string>()), "application/json");
  });
  GatewayOptions options = quiet_gateway();
  options.parallelism = 4;
  Gateway gw(options);
  gw.register_backend("r", std::make_shared<RemoteBackend>(RemoteBackendConfig{server.url("/v1"), "m", "k123", 10}));
  std::vector<ChatRequest> requests;
  for (int i = 0; i < 16; ++i) requests.push_back(req("q" + std::to_string(i), "r"));
  const auto out = gw.complete_many(requests);
  const auto transcript = gw.transcript();
  ASSERT_EQ(transcript.size(), 16u);
  for (int i = 0; i < 16; ++i) {
    EXPECT_EQ(out[static_cast<std::size_t>(i)].value(), "echo:q" + std::to_string(i));
    EXPECT_EQ(transcript[static_cast<std::size_t>(i)].user, "q" + std::to_string(i));
  }
  EXPECT_EQ(auth, (std::set<std::string>{"Bearer k123"}));
}

TEST(RemoteBackend, RetriesTransientFailuresOnly) {
  std::atomic<int> calls{0};
  StubServer server([&](const httplib::Request& r, httplib::Response& res) {
    const int n = ++calls;
    const std::string user = nlohmann::json::parse(r.body)["messages"][1]["content"];
    if (user == "flaky" && n < 3) {
      res.status = n == 1 ? 503 : 429;
      return;
    }
    if (user == "bad") {
      res.status = 400;
      res.set_content("nope", "text/plain");
      return;
    }
    res.set_content(chat_reply("ok"), "application/json");
  });
  GatewayOptions options = quiet_gateway();
  options.retry.attempts = 3;
  options.retry.backoff_base = std::chrono::milliseconds(1);
  Gateway gw(options);
  gw.register_backend("r", std::make_shared<RemoteBackend>(RemoteBackendConfig{server.url(), "m", "", 10}));

  EXPECT_EQ(gw.complete(req("flaky", "r")), "ok");
  EXPECT_EQ(gw.transcript().back().attempts, 3);

  calls = 0;
  try {
    gw.complete(req("bad", "r"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TransportError);
  }
  EXPECT_EQ(calls.load(), 1);
  EXPECT_EQ(gw.transcript().back().attempts, 1);
}

TEST(RemoteBackend, UnreachableHostIsTransportError) {
  GatewayOptions options = quiet_gateway();
  options.retry.attempts = 2;
  options.retry.backoff_base = std::chrono::milliseconds(1);
  Gateway gw(options);
  gw.register_backend("r", std::make_shared<RemoteBackend>(RemoteBackendConfig{"http://127.0.0.1:1", "m", "", 2}));
  try {
    gw.complete(req("x", "r"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TransportError);
  }
  EXPECT_EQ(gw.transcript().back().attempts, 2);
}

TEST(RemoteBackendConfig, EnvironmentResolution) {
  ::setenv("LENSLOOP_API_BASE", "http://global", 1);
  ::setenv("LENSLOOP_API_KEY", "gk", 1);
  ::setenv("LENSLOOP_BACKEND_MY_CTX_URL", "http://specific", 1);
  auto cfg = RemoteBackendConfig::from_env("my-ctx", "model");
  EXPECT_EQ(cfg.base_url, "http://specific");
  EXPECT_EQ(cfg.api_key, "gk");
  cfg = RemoteBackendConfig::from_env("other", "model", "http://explicit");
  EXPECT_EQ(cfg.base_url, "http://explicit");
  ::unsetenv("LENSLOOP_API_BASE");
  EXPECT_THROW(RemoteBackendConfig::from_env("other", "model"), Error);
  ::unsetenv("LENSLOOP_API_KEY");
  ::unsetenv("LENSLOOP_BACKEND_MY_CTX_URL");
}

}  // namespace
}  // namespace lensloop
