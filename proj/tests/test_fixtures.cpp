#include "ironic/fixtures.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

namespace {

using namespace ironic;
using test_support::TempDir;

std::map<std::string, std::string> snapshot_tree(
    const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    files[std::filesystem::relative(entry.path(), root).string()] =
        test_support::read_text(entry.path());
  }
  return files;
}

TEST(Png, EncodesValidSignatureAndDimensions) {
  auto png = solid_png(16, 16, 10, 20, 30);
  ASSERT_GE(png.size(), 33u);
  const unsigned char sig[] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  EXPECT_TRUE(std::equal(std::begin(sig), std::end(sig), png.begin()));
  // IHDR starts at byte 8: length(4) type(4) then width/height big-endian.
  auto be32 = [&](std::size_t at) {
    return (png[at] << 24) | (png[at + 1] << 16) | (png[at + 2] << 8) |
           png[at + 3];
  };
  EXPECT_EQ(be32(16), 16);  // width
  EXPECT_EQ(be32(20), 16);  // height
  EXPECT_EQ(png[24], 8);    // bit depth
  EXPECT_EQ(png[25], 2);    // truecolor
  EXPECT_EQ(sniff_mime(png, "x.bin"), "image/png");
}

TEST(Png, StoredDeflateRoundTripsThroughPayload) {
  auto png = solid_png(3, 2, 200, 100, 50);
  ImagePayload p = make_image_payload(png, "x.png");
  EXPECT_EQ(p.mime, "image/png");
  EXPECT_EQ(base64_decode(p.encoded.substr(p.encoded.find(',') + 1)), p.bytes);
}

TEST(Fixtures, GenerationIsByteStable) {
  TempDir a;
  TempDir b;
  generate_fixtures(a.path());
  generate_fixtures(b.path());
  auto ta = snapshot_tree(a.path());
  auto tb = snapshot_tree(b.path());
  ASSERT_EQ(ta.size(), tb.size());
  for (const auto& [rel, content] : ta) {
    ASSERT_TRUE(tb.contains(rel)) << rel;
    EXPECT_EQ(content, tb.at(rel)) << "fixture drift: " << rel;
  }
}

TEST(Fixtures, CommittedTreeMatchesGenerator) {
  const auto committed = test_support::source_dir() / "fixtures";
  ASSERT_TRUE(std::filesystem::exists(committed))
      << "run `ironic fixtures --out fixtures` once and commit the result";
  TempDir fresh;
  generate_fixtures(fresh.path());
  auto expected = snapshot_tree(fresh.path());
  auto actual = snapshot_tree(committed);
  ASSERT_EQ(actual.size(), expected.size());
  for (const auto& [rel, content] : expected) {
    ASSERT_TRUE(actual.contains(rel)) << rel;
    EXPECT_EQ(actual.at(rel), content) << "committed fixture drift: " << rel;
  }
}

TEST(Fixtures, CorpusShapeAndCoverage) {
  TempDir tmp;
  generate_fixtures(tmp.path());
  Manifest m = load_manifest((tmp.path() / "manifest.jsonl").string(),
                             {.check_images = true});
  ASSERT_EQ(m.samples.size(), 12u);
  int sarcastic = 0;
  for (const auto& s : m.samples) sarcastic += s.gold == Label::Sarcastic;
  EXPECT_EQ(sarcastic, 6);

  // All five relations appear in the ironic script, plus one truncated
  // (unparsed) rationale and one non-numeric final answer.
  std::set<CoherenceRelation> seen;
  int truncated = 0, invalid_answers = 0;
  for (const FixtureSample& fx : kFixtureCorpus) {
    CoherenceRelation cr = parse_relation(fx.ironic_rationale,
                                          fx.ironic_rationale_truncated);
    seen.insert(cr);
    truncated += fx.ironic_rationale_truncated;
    invalid_answers += !parse_binary(fx.ironic_answer).valid;
  }
  EXPECT_EQ(seen.size(), 6u);  // five named + Unparsed
  EXPECT_EQ(truncated, 1);
  EXPECT_EQ(invalid_answers, 1);
}

TEST(Fixtures, ReferenceShapedManifestsValidate) {
  TempDir tmp;
  write_reference_shaped_manifest(tmp.path(), Dataset::Mmsd2);
  Manifest m = load_manifest(tmp.str("mmsd2.jsonl"));
  EXPECT_EQ(m.samples.size(), 2409u);
  auto report = validate_counts(m.samples, *expected_counts(Dataset::Mmsd2));
  EXPECT_TRUE(report.pass);

  write_reference_shaped_manifest(tmp.path(), Dataset::RedEval);
  Manifest r = load_manifest(tmp.str("redeval.jsonl"));
  EXPECT_EQ(r.samples.size(), 1004u);
  EXPECT_TRUE(validate_counts(r.samples, *expected_counts(Dataset::RedEval))
                  .pass);
}

TEST(Fixtures, ExpectedConfusionFilesMatchHandTable) {
  TempDir tmp;
  generate_fixtures(tmp.path());
  for (const ExpectedOutcome& e : kExpectedOutcomes) {
    auto j = nlohmann::json::parse(test_support::read_text(
        tmp.path() / "expected" /
        ("confusion_" + std::string(strategy_name(e.strategy)) + ".json")));
    EXPECT_EQ(j["tp"], e.tp);
    EXPECT_EQ(j["fp"], e.fp);
    EXPECT_EQ(j["fn"], e.fn);
    EXPECT_EQ(j["tn"], e.tn);
    EXPECT_EQ(j["tp"].get<int>() + j["fp"].get<int>() + j["fn"].get<int>() +
                  j["tn"].get<int>(),
              12);
  }
}

}  // namespace
