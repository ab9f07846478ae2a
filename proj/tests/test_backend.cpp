#include "ironic/backend.hpp"

#include "ironic/fixtures.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace {

using namespace ironic;
using test_support::TempDir;
using test_support::write_text;

std::shared_ptr<const ImagePayload> test_image(unsigned char shade = 5) {
  auto png = solid_png(1, 1, shade, shade, shade);
  return std::make_shared<const ImagePayload>(make_image_payload(png, "t.png"));
}

Conversation test_conversation(const std::string& text = "caption") {
  Sample s{"s1", "t.png", text, Label::Sarcastic, Dataset::Custom};
  return build_turn(TemplateId::ZeroShotUser, s, test_image());
}

TEST(CacheKey, StableAndContentSensitive) {
  Conversation a = test_conversation("caption");
  Conversation b = test_conversation("caption");
  DecodingParams params;
  EXPECT_EQ(cache_key(a, params, "m"), cache_key(b, params, "m"));

  Conversation c = test_conversation("caption!");
  EXPECT_NE(cache_key(a, params, "m"), cache_key(c, params, "m"));

  DecodingParams hotter;
  hotter.temperature = 0.7;
  EXPECT_NE(cache_key(a, params, "m"), cache_key(a, hotter, "m"));
  EXPECT_NE(cache_key(a, params, "m"), cache_key(a, params, "m2"));
}

TEST(CacheKey, ImageBytesParticipate) {
  Sample s{"s1", "t.png", "caption", Label::Sarcastic, Dataset::Custom};
  Conversation a = build_turn(TemplateId::ZeroShotUser, s, test_image(5));
  Conversation b = build_turn(TemplateId::ZeroShotUser, s, test_image(6));
  EXPECT_NE(cache_key(a, {}, "m"), cache_key(b, {}, "m"));
}

TEST(MockBackend, ScriptedResponse) {
  TempDir tmp;
  write_text(tmp.path() / "script.jsonl",
             nlohmann::json{{"sample_id", "s1"},
                            {"turn", 0},
                            {"response",
                             "Restatement. The text directly describes the "
                             "image."},
                            {"finish", "stop"}}
                     .dump() +
                 "\n");
  auto backend = MockScriptBackend::load(tmp.str("script.jsonl"));
  CompletionResult r =
      backend->complete(test_conversation(), {}, "m", {"s1", 0});
  EXPECT_EQ(r.text, "Restatement. The text directly describes the image.");
  EXPECT_EQ(r.finish, FinishReason::Stop);
  EXPECT_EQ(r.endpoint_used, EndpointKind::Mock);
  EXPECT_EQ(backend->calls(), 1u);

  EXPECT_THROW(backend->complete(test_conversation(), {}, "m", {"s1", 1}),
               BackendError);
}

TEST(MockBackend, LengthFinishMarksTruncation) {
  auto backend = std::make_shared<MockScriptBackend>();
  backend->add("s1", 0, {"cut off", FinishReason::Length});
  CompletionResult r =
      backend->complete(test_conversation(), {}, "m", {"s1", 0});
  EXPECT_EQ(r.finish, FinishReason::Length);
}

TEST(CacheStore, HitSkipsInnerBackend) {
  TempDir tmp;
  auto inner = std::make_shared<MockScriptBackend>();
  inner->add("s1", 0, {"answer", FinishReason::Stop});
  auto store = CacheStore::open(tmp.str("cache.jsonl"), /*create=*/true);
  CachingBackend cached(inner, store);

  Conversation conv = test_conversation();
  CompletionResult first = cached.complete(conv, {}, "m", {"s1", 0});
  EXPECT_FALSE(first.cached);
  EXPECT_EQ(inner->calls(), 1u);

  CompletionResult second = cached.complete(conv, {}, "m", {"s1", 0});
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(second.text, first.text);
  EXPECT_EQ(inner->calls(), 1u);  // no second scripted call
}

TEST(CacheStore, PersistsAcrossReopen) {
  TempDir tmp;
  Conversation conv = test_conversation();
  const std::string key = cache_key(conv, {}, "m");
  {
    auto store = CacheStore::open(tmp.str("cache.jsonl"), true);
    CompletionResult r;
    r.text = "persisted";
    store->insert(key, {"s1", 0}, "m", r);
  }
  auto reopened = CacheStore::open(tmp.str("cache.jsonl"), true);
  auto hit = reopened->lookup(key);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->text, "persisted");
}

TEST(CacheStore, FirstWriterWins) {
  TempDir tmp;
  auto store = CacheStore::open(tmp.str("cache.jsonl"), true);
  CompletionResult a;
  a.text = "first";
  CompletionResult b;
  b.text = "second";
  store->insert("k", {"s1", 0}, "m", a);
  store->insert("k", {"s1", 0}, "m", b);
  EXPECT_EQ(store->lookup("k")->text, "first");
  EXPECT_EQ(store->size(), 1u);
}

TEST(Replay, AnswersFromArchiveOnly) {
  TempDir tmp;
  Conversation conv = test_conversation();
  DecodingParams params;
  {
    auto store = CacheStore::open(tmp.str("archive.jsonl"), true);
    CompletionResult r;
    r.text = "recorded";
    store->insert(cache_key(conv, params, "m"), {"s1", 0}, "m", r);
  }
  auto replay = ReplayBackend::open(tmp.str("archive.jsonl"));
  CompletionResult r = replay->complete(conv, params, "m", {"s1", 0});
  EXPECT_EQ(r.text, "recorded");
  EXPECT_TRUE(r.cached);

  Conversation other = test_conversation("different caption");
  try {
    replay->complete(other, params, "m", {"s9", 1});
    FAIL() << "expected ReplayMiss";
  } catch (const ReplayMiss& e) {
    EXPECT_NE(std::string(e.what()).find("s9"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("turn 1"), std::string::npos);
  }
}

TEST(Replay, MissingArchiveFails) {
  EXPECT_THROW(ReplayBackend::open("/nonexistent/archive.jsonl"),
               BackendError);
}

TEST(Backoff, CeilingGrowsGeometricallyAndCaps) {
  BackoffPolicy policy;  // base 1s, factor 2, 5 attempts
  EXPECT_EQ(policy.ceiling_ms(0), 1000);
  EXPECT_EQ(policy.ceiling_ms(1), 2000);
  EXPECT_EQ(policy.ceiling_ms(2), 4000);
  EXPECT_EQ(policy.ceiling_ms(3), 8000);
  EXPECT_EQ(policy.ceiling_ms(10), 60000);  // capped
}

TEST(Backoff, FullJitterStaysWithinCeiling) {
  BackoffPolicy policy;
  std::mt19937_64 rng(7);
  for (int attempt = 0; attempt < 5; ++attempt) {
    for (int i = 0; i < 200; ++i) {
      auto d = policy.jittered_delay_ms(attempt, rng);
      EXPECT_GE(d, 0);
      EXPECT_LE(d, policy.ceiling_ms(attempt));
    }
  }
}

}  // namespace
