#include "ironic/http_backend.hpp"

#include "ironic/fixtures.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>

namespace {

using namespace ironic;

std::shared_ptr<const ImagePayload> test_image() {
  auto png = solid_png(1, 1, 40, 50, 60);
  return std::make_shared<const ImagePayload>(make_image_payload(png, "t.png"));
}

Conversation test_conversation() {
  Sample s{"s1", "t.png", "caption", Label::Sarcastic, Dataset::Custom};
  return build_turn(TemplateId::ZeroShotUser, s, test_image());
}

std::string completion_body(const std::string& text,
                            const std::string& finish = "stop") {
  return nlohmann::json{
      {"choices",
       {{{"message", {{"role", "assistant"}, {"content", text}}},
         {"finish_reason", finish}}}}}
      .dump();
}

class LocalServer {
 public:
  explicit LocalServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    while (!server_.is_running()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

LiveBackendOptions options_for(const std::string& url,
                               std::vector<std::int64_t>* slept = nullptr) {
  LiveBackendOptions opts;
  opts.primary.url = url;
  opts.primary.api_key = "test-key";
  opts.backoff.base_ms = 8;  // keep unit tests fast; policy shape unchanged
  opts.jitter_seed = 1234;
  opts.sleep_fn = [slept](std::chrono::milliseconds d) {
    if (slept) slept->push_back(d.count());
  };
  return opts;
}

TEST(ParseUrl, SplitsBaseAndPath) {
  ParsedUrl u = parse_url("https://api.example.com/v1/chat/completions");
  EXPECT_EQ(u.base, "https://api.example.com");
  EXPECT_EQ(u.path, "/v1/chat/completions");
  ParsedUrl bare = parse_url("http://127.0.0.1:8080");
  EXPECT_EQ(bare.base, "http://127.0.0.1:8080");
  EXPECT_EQ(bare.path, "/");
  EXPECT_THROW(parse_url("not-a-url"), AuthError);
}

TEST(WireFormat, MessagesAndDecodingParams) {
  nlohmann::json captured;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    captured = nlohmann::json::parse(req.body);
    res.set_content(completion_body("1"), "application/json");
  });
  LiveBackend backend(options_for(server.url()));
  DecodingParams params;
  CompletionResult r =
      backend.complete(test_conversation(), params, "gpt-4o", {"s1", 0});
  EXPECT_EQ(r.text, "1");
  EXPECT_EQ(r.finish, FinishReason::Stop);
  EXPECT_EQ(r.endpoint_used, EndpointKind::Primary);

  EXPECT_EQ(captured["model"], "gpt-4o");
  EXPECT_EQ(captured["temperature"], 0.0);
  EXPECT_EQ(captured["max_tokens"], 512);
  EXPECT_EQ(captured["seed"], 42);
  ASSERT_EQ(captured["messages"].size(), 2u);
  EXPECT_EQ(captured["messages"][0]["role"], "system");
  EXPECT_TRUE(captured["messages"][0]["content"].is_string());
  const auto& user = captured["messages"][1];
  ASSERT_TRUE(user["content"].is_array());
  ASSERT_EQ(user["content"].size(), 3u);
  EXPECT_EQ(user["content"][0]["type"], "text");
  EXPECT_EQ(user["content"][1]["type"], "image_url");
  const std::string data_url = user["content"][1]["image_url"]["url"];
  EXPECT_TRUE(data_url.starts_with("data:image/png;base64,"));
  EXPECT_EQ(user["content"][2]["text"], "Text: caption");
}

TEST(Retry, TransientErrorsThenSuccess) {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    const int n = ++hits;
    if (n <= 2) {
      res.status = n == 1 ? 500 : 429;
      res.set_content("busy", "text/plain");
      return;
    }
    res.set_content(completion_body("ok after retries"), "application/json");
  });
  std::vector<std::int64_t> slept;
  LiveBackend backend(options_for(server.url(), &slept));
  CompletionResult r =
      backend.complete(test_conversation(), {}, "m", {"s1", 0});
  EXPECT_EQ(r.text, "ok after retries");
  EXPECT_EQ(hits.load(), 3);
  ASSERT_EQ(slept.size(), 2u);  // slept before each retry
  EXPECT_LE(slept[0], 8);       // full jitter within base ceiling
  EXPECT_LE(slept[1], 16);
}

TEST(Retry, ExhaustsAfterMaxAttempts) {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  LiveBackend backend(options_for(server.url()));
  EXPECT_THROW(backend.complete(test_conversation(), {}, "m", {"s1", 0}),
               BackendError);
  EXPECT_EQ(hits.load(), 5);
}

TEST(Retry, AuthErrorsFailFastWithoutRetry) {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  LiveBackend backend(options_for(server.url()));
  EXPECT_THROW(backend.complete(test_conversation(), {}, "m", {"s1", 0}),
               AuthError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(ContentFilter, FallsBackToSecondEndpoint) {
  LocalServer primary([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content(
        nlohmann::json{{"error",
                        {{"code", "content_filter"},
                         {"message", "filtered"}}}}
            .dump(),
        "application/json");
  });
  LocalServer fallback([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_body("0"), "application/json");
  });
  LiveBackendOptions opts = options_for(primary.url());
  opts.fallback = EndpointConfig{fallback.url(), "fallback-key"};
  LiveBackend backend(std::move(opts));
  CompletionResult r =
      backend.complete(test_conversation(), {}, "m", {"s1", 0});
  EXPECT_EQ(r.text, "0");
  EXPECT_EQ(r.endpoint_used, EndpointKind::Fallback);
}

TEST(ContentFilter, RefusalShapedReplyTriggersFallback) {
  LocalServer primary([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_body("I cannot assist with that request."),
                    "application/json");
  });
  LocalServer fallback([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_body("1"), "application/json");
  });
  LiveBackendOptions opts = options_for(primary.url());
  opts.fallback = EndpointConfig{fallback.url(), "fallback-key"};
  LiveBackend backend(std::move(opts));
  CompletionResult r =
      backend.complete(test_conversation(), {}, "m", {"s1", 0});
  EXPECT_EQ(r.endpoint_used, EndpointKind::Fallback);
  EXPECT_EQ(r.text, "1");
}

TEST(ContentFilter, BothEndpointsFilteredIsAnError) {
  auto filtered = [](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_body("", "content_filter"), "application/json");
  };
  LocalServer primary(filtered);
  LocalServer fallback(filtered);
  LiveBackendOptions opts = options_for(primary.url());
  opts.fallback = EndpointConfig{fallback.url(), "fallback-key"};
  LiveBackend backend(std::move(opts));
  EXPECT_THROW(backend.complete(test_conversation(), {}, "m", {"s1", 0}),
               BackendError);
}

TEST(ContentFilter, NoFallbackYieldsEmptyFilteredResult) {
  LocalServer primary([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_body("blocked", "content_filter"),
                    "application/json");
  });
  LiveBackend backend(options_for(primary.url()));
  CompletionResult r =
      backend.complete(test_conversation(), {}, "m", {"s1", 0});
  EXPECT_EQ(r.finish, FinishReason::ContentFilter);
  EXPECT_TRUE(r.text.empty());
}

TEST(ContentFilter, LengthFinishPassesThrough) {
  LocalServer primary([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_body("cut off rationale", "length"),
                    "application/json");
  });
  LiveBackend backend(options_for(primary.url()));
  CompletionResult r =
      backend.complete(test_conversation(), {}, "m", {"s1", 0});
  EXPECT_EQ(r.finish, FinishReason::Length);
  EXPECT_EQ(r.text, "cut off rationale");
}

TEST(RefusalPatterns, CaseInsensitiveSubstrings) {
  auto patterns = default_refusal_patterns();
  EXPECT_TRUE(matches_refusal("I CANNOT ASSIST WITH this", patterns));
  EXPECT_FALSE(matches_refusal("Restatement. The text matches.", patterns));
  EXPECT_TRUE(matches_refusal("i'm sorry, but i can't help", patterns));
}

}  // namespace
