#include "ironic/strategies.hpp"

#include "ironic/fixtures.hpp"

#include <gtest/gtest.h>

namespace {

using namespace ironic;

std::shared_ptr<const ImagePayload> test_image() {
  auto png = solid_png(1, 1, 1, 2, 3);
  return std::make_shared<const ImagePayload>(make_image_payload(png, "t.png"));
}

Sample test_sample() {
  return {"s1", "t.png", "caption", Label::Sarcastic, Dataset::Custom};
}

TEST(Strategy, TurnCounts) {
  EXPECT_EQ(turn_count(StrategyId::ZeroShot), 1);
  EXPECT_EQ(turn_count(StrategyId::ZeroShotCot), 2);
  EXPECT_EQ(turn_count(StrategyId::S3Cot), 2);
  EXPECT_EQ(turn_count(StrategyId::Ironic), 2);
}

TEST(Strategy, NameRoundTrip) {
  for (StrategyId s : kAllStrategies) {
    EXPECT_EQ(strategy_from_name(strategy_name(s)), s);
  }
  EXPECT_EQ(strategy_from_name("ZERO_SHOT_COT"), StrategyId::ZeroShotCot);
  EXPECT_THROW(strategy_from_name("few-shot"), std::invalid_argument);
}

TEST(Strategy, IronicTurnOneConversation) {
  StrategyState st = make_state(StrategyId::Ironic, test_sample(), test_image());
  const Conversation& conv = next_request(st);
  ASSERT_EQ(conv.size(), 2u);
  EXPECT_EQ(conv.messages()[0].role, Role::System);
  EXPECT_EQ(conv.messages()[0].parts[0].text,
            template_body(TemplateId::IronicSystem));
  EXPECT_EQ(conv.messages()[1].role, Role::User);
}

TEST(Strategy, NextRequestIsPureAndRepeatable) {
  StrategyState st = make_state(StrategyId::S3Cot, test_sample(), test_image());
  std::string first = render_conversation(next_request(st));
  std::string second = render_conversation(next_request(st));
  EXPECT_EQ(first, second);
  EXPECT_EQ(st.turn_index, 0);
  EXPECT_FALSE(st.done);
}

TEST(Strategy, TurnTwoEmbedsRationaleVerbatim) {
  StrategyState st = make_state(StrategyId::Ironic, test_sample(), test_image());
  const std::string rationale = "  Restatement, with odd spacing \n";
  st = ingest_response(std::move(st), rationale, false);
  EXPECT_EQ(st.turn_index, 1);
  ASSERT_TRUE(st.rationale.has_value());
  EXPECT_EQ(*st.rationale, rationale);

  const Conversation& conv = next_request(st);
  ASSERT_EQ(conv.size(), 4u);  // system, user, assistant, user
  EXPECT_EQ(conv.messages()[2].role, Role::Assistant);
  EXPECT_EQ(conv.messages()[2].parts[0].text, rationale);  // no trimming
  EXPECT_EQ(conv.messages()[3].parts[0].text,
            template_body(TemplateId::IronicUser2));
}

TEST(Strategy, ZeroShotCompletesInOneTurn) {
  StrategyState st =
      make_state(StrategyId::ZeroShot, test_sample(), test_image());
  st = ingest_response(std::move(st), "1", false);
  EXPECT_TRUE(st.done);
  EXPECT_EQ(st.final_raw, "1");
  EXPECT_THROW(next_request(st), StrategyError);
  EXPECT_THROW(ingest_response(std::move(st), "again", false), StrategyError);
}

TEST(Strategy, TruncatedRationaleStillAdvances) {
  StrategyState st = make_state(StrategyId::Ironic, test_sample(), test_image());
  st = ingest_response(std::move(st), "cut off mid-sent", true);
  EXPECT_TRUE(st.rationale_truncated);
  EXPECT_FALSE(st.done);
  st = ingest_response(std::move(st), "0", false);
  EXPECT_TRUE(st.done);
  EXPECT_EQ(st.final_raw, "0");
}

TEST(Strategy, RequestCountEqualsTurnCount) {
  for (StrategyId s : kAllStrategies) {
    StrategyState st = make_state(s, test_sample(), test_image());
    int requests = 0;
    while (!st.done) {
      next_request(st);
      ++requests;
      st = ingest_response(std::move(st), requests == 1 ? "blah" : "1",
                           /*truncated=*/requests == 1);
    }
    EXPECT_EQ(requests, turn_count(s));
  }
}

}  // namespace
