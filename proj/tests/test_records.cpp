#include "ironic/records.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <thread>

namespace {

using namespace ironic;
using test_support::TempDir;

RunRecord sample_record(const std::string& id) {
  RunRecord r;
  r.sample_id = id;
  r.dataset = Dataset::Custom;
  r.model = "mock-model";
  r.strategy = StrategyId::Ironic;
  r.backend_kind = "mock";
  r.turns.push_back({"Restatement, clearly.", FinishReason::Stop,
                     EndpointKind::Mock, false, 0});
  r.turns.push_back({"1", FinishReason::Stop, EndpointKind::Mock, false, 0});
  r.relation = CoherenceRelation::Restatement;
  r.prediction = Prediction{Label::Sarcastic, true, "1"};
  r.gold = Label::Sarcastic;
  r.started_at = "2025-01-01T00:00:00Z";
  r.finished_at = "2025-01-01T00:00:01Z";
  return r;
}

TEST(Records, JsonRoundTrip) {
  RunRecord original = sample_record("s1");
  RunRecord parsed = record_from_json(record_to_json(original));
  EXPECT_EQ(parsed.sample_id, original.sample_id);
  EXPECT_EQ(parsed.strategy, original.strategy);
  EXPECT_EQ(parsed.model, original.model);
  ASSERT_EQ(parsed.turns.size(), 2u);
  EXPECT_EQ(parsed.turns[0].raw, original.turns[0].raw);
  EXPECT_EQ(parsed.relation, original.relation);
  ASSERT_TRUE(parsed.prediction.has_value());
  EXPECT_EQ(parsed.prediction->label, Label::Sarcastic);
  EXPECT_TRUE(parsed.prediction->valid);
  EXPECT_EQ(parsed.gold, original.gold);
  EXPECT_FALSE(parsed.failed);
}

TEST(Records, FailedRecordRoundTrip) {
  RunRecord r = sample_record("s2");
  r.prediction.reset();
  r.relation.reset();
  r.failed = true;
  r.error = "exhausted retries";
  RunRecord parsed = record_from_json(record_to_json(r));
  EXPECT_TRUE(parsed.failed);
  EXPECT_EQ(parsed.error, "exhausted retries");
  EXPECT_FALSE(parsed.prediction.has_value());
}

TEST(Records, WriterAppendsOneLinePerRecord) {
  TempDir tmp;
  const std::string path = tmp.str("records.jsonl");
  {
    RecordsWriter writer(path);
    writer.append(sample_record("s1"));
    writer.append(sample_record("s2"));
  }
  RecordsFile rf = load_records(path);
  ASSERT_EQ(rf.records.size(), 2u);
  EXPECT_EQ(rf.records[0].sample_id, "s1");
  EXPECT_EQ(rf.records[1].sample_id, "s2");
  EXPECT_FALSE(rf.torn_tail);
}

TEST(Records, TornTailIsDetectedAndRepairable) {
  TempDir tmp;
  const std::string path = tmp.str("records.jsonl");
  {
    RecordsWriter writer(path);
    writer.append(sample_record("s1"));
  }
  const auto intact_size = std::filesystem::file_size(path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << "{\"sample_id\": \"s2\", \"dat";  // interrupted append
  }
  RecordsFile rf = load_records(path);
  ASSERT_EQ(rf.records.size(), 1u);
  EXPECT_TRUE(rf.torn_tail);
  EXPECT_EQ(rf.valid_bytes, intact_size);

  std::filesystem::resize_file(path, rf.valid_bytes);
  {
    RecordsWriter writer(path);
    writer.append(sample_record("s2"));
  }
  RecordsFile repaired = load_records(path);
  ASSERT_EQ(repaired.records.size(), 2u);
  EXPECT_FALSE(repaired.torn_tail);
}

TEST(Records, ConcurrentAppendsStayLineAtomic) {
  TempDir tmp;
  const std::string path = tmp.str("records.jsonl");
  {
    RecordsWriter writer(path);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 25; ++i) {
          writer.append(sample_record("t" + std::to_string(t) + "-" +
                                      std::to_string(i)));
        }
      });
    }
    for (auto& th : threads) th.join();
  }
  RecordsFile rf = load_records(path);
  EXPECT_EQ(rf.records.size(), 100u);
  EXPECT_FALSE(rf.torn_tail);
}

}  // namespace
