#pragma once

#include "ironic/analysis.hpp"
#include "ironic/corpus.hpp"
#include "ironic/runner.hpp"
#include "ironic/strategies.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace ironic {

namespace detail {

inline std::uint32_t crc32_png(std::span<const unsigned char> data,
                               std::uint32_t crc = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t n = 0; n < 256; ++n) {
      std::uint32_t c = n;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      }
      t[n] = c;
    }
    return t;
  }();
  crc ^= 0xffffffffu;
  for (unsigned char b : data) crc = table[(crc ^ b) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

inline std::uint32_t adler32(std::span<const unsigned char> data) {
  std::uint32_t a = 1, b = 0;
  for (unsigned char byte : data) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  return (b << 16) | a;
}

inline void push_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

inline void push_chunk(std::vector<unsigned char>& out, const char type[4],
                       std::span<const unsigned char> data) {
  push_be32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<unsigned char> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  push_be32(out, crc32_png(body));
}

}  // namespace detail

// Minimal RGB PNG encoder using stored (uncompressed) deflate blocks, so the
// generated bytes never depend on a compressor version. Good for tiny
// placeholder images only.
inline std::vector<unsigned char> encode_png_rgb(
    int width, int height, std::span<const unsigned char> rgb) {
  if (width <= 0 || height <= 0 ||
      rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw std::invalid_argument("encode_png_rgb: bad dimensions");
  }
  std::vector<unsigned char> raw;
  raw.reserve((width * 3 + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    const auto* row = rgb.data() + static_cast<std::size_t>(y) * width * 3;
    raw.insert(raw.end(), row, row + width * 3);
  }

  std::vector<unsigned char> idat{0x78, 0x01};  // zlib header, no compression
  std::size_t off = 0;
  while (off < raw.size()) {
    const std::size_t n = std::min<std::size_t>(raw.size() - off, 65535);
    const bool final = off + n == raw.size();
    idat.push_back(final ? 0x01 : 0x00);
    idat.push_back(static_cast<unsigned char>(n & 0xff));
    idat.push_back(static_cast<unsigned char>(n >> 8));
    idat.push_back(static_cast<unsigned char>(~n & 0xff));
    idat.push_back(static_cast<unsigned char>((~n >> 8) & 0xff));
    idat.insert(idat.end(), raw.begin() + off, raw.begin() + off + n);
    off += n;
  }
  detail::push_be32(idat, detail::adler32(raw));

  std::vector<unsigned char> png{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<unsigned char> ihdr;
  detail::push_be32(ihdr, static_cast<std::uint32_t>(width));
  detail::push_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::push_chunk(png, "IHDR", ihdr);
  detail::push_chunk(png, "IDAT", idat);
  detail::push_chunk(png, "IEND", {});
  return png;
}

inline std::vector<unsigned char> solid_png(int width, int height,
                                            unsigned char r, unsigned char g,
                                            unsigned char b) {
  std::vector<unsigned char> rgb;
  rgb.reserve(static_cast<std::size_t>(width) * height * 3);
  for (int i = 0; i < width * height; ++i) {
    rgb.push_back(r);
    rgb.push_back(g);
    rgb.push_back(b);
  }
  return encode_png_rgb(width, height, rgb);
}

// The 12-sample offline corpus: 6 sarcastic / 6 not, all five coherence
// relations, one truncated rationale (no relation named) and one final answer
// the binary parser has to recover from.
struct FixtureSample {
  std::string_view id;
  std::array<unsigned char, 3> color;
  std::string_view caption;
  int gold;
  std::string_view ironic_rationale;
  bool ironic_rationale_truncated;
  std::string_view ironic_answer;
  std::string_view zero_shot_answer;
  std::string_view cot_rationale;
  bool cot_rationale_truncated;
  std::string_view cot_answer;
  std::string_view s3_rationale;
  std::string_view s3_answer;
};

inline constexpr std::array<FixtureSample, 12> kFixtureCorpus = {{
    {"s01",
     {178, 34, 34},
     "what a thrill to spend saturday night doing taxes",
     1,
     "Analysis: The caption mirrors what the image shows. The most "
     "appropriate coherence relation is Restatement.",
     false, "1", "1",
     "Step by step: the praise clashes with the dreary scene, which reads as "
     "mockery.",
     false, "1",
     "Superficial: tone and scene disagree. Semantic: exaggerated delight. "
     "Sentiment: frustration beneath praise.",
     "1"},
    {"s02",
     {70, 130, 180},
     "the weather is absolutely perfect today",
     1,
     "This could be Projection, but Extension fits better here.",
     false, "1", "0",
     "Step by step: the caption praises the weather while the image shows a "
     "downpour, which sugg",
     true, "1",
     "Superficial: praise over a storm. Semantic: opposite of depicted. "
     "Sentiment: annoyance.",
     "0"},
    {"s03",
     {34, 139, 34},
     "nothing says fine dining like this masterpiece",
     1,
     "The salient object is only visible, never named. Coherence relation: "
     "Insertion. The text omits the entity entirely.",
     false, "1", "0",
     "Step by step: grand words over a sad plate; likely ironic.",
     false, "0",
     "Superficial: grandiose phrasing. Semantic: mismatch with the plate. "
     "Sentiment: dismissive.",
     "0"},
    {"s04",
     {218, 165, 32},
     "  wow, another trophy for participation  ",
     1,
     "Both text and image mention the trophy explicitly. I would label this "
     "Concretization.",
     false, "1", " 1\n",
     "Step by step: the flat tone undercuts the award imagery.",
     false, "1",
     "Superficial: deadpan praise. Semantic: award vs indifference. "
     "Sentiment: contempt.",
     "1"},
    {"s05",
     {147, 112, 219},
     "love being packed in like sardines\non my morning commute",
     1,
     "Let me look at the image first. The scene shows a crowded subway "
     "platform during what appears to be rush hour, and the caption seems to "
     "sugg",
     true, "1", "0",
     "Step by step: affection for an unpleasant commute is plainly ironic.",
     false, "1",
     "Superficial: love for discomfort. Semantic: crowding. Sentiment: "
     "exasperation.",
     "0"},
    {"s06",
     {255, 140, 0},
     "my diet is going great \xF0\x9F\x99\x83",
     1,
     "The text topic maps onto the depicted objects analogically, so the "
     "coherence relation is Projection rather than Restatement.",
     false, "1", "The answer is 1.",
     "Step by step: the upside-down smiley plus dessert reads as "
     "self-mockery.",
     false, "1",
     "Superficial: cheerful claim, indulgent image. Semantic: diet vs "
     "dessert. Sentiment: resignation.",
     "1"},
    {"s07",
     {0, 139, 139},
     "sunset over the bay marina",
     0,
     "The text directly describes the image contents. Coherence Relation - "
     "Restatement.",
     false, "0", "0",
     "Step by step: a plain description of a sunset; nothing mocking.",
     false, "0",
     "Superficial: literal caption. Semantic: aligned. Sentiment: neutral.",
     "0"},
    {"s08",
     {199, 21, 133},
     "our new kitten exploring the garden",
     0,
     "The image adds scenery beyond what the text story covers. Extension.",
     false, "0", "1.",
     "Step by step: an affectionate pet photo, no irony.",
     false, "0",
     "Superficial: fond caption. Semantic: consistent. Sentiment: warm.",
     "1"},
    {"s09",
     {112, 128, 144},
     "fresh bread right out of the oven",
     0,
     "No explicit mention of the pictured object in the caption. The "
     "coherence relation here is Insertion.",
     false, "1", "Sarcastic.",
     "Step by step: appetizing bread, straightforward caption.",
     false, "1",
     "Superficial: plain statement. Semantic: aligned. Sentiment: content.",
     "1"},
    {"s10",
     {210, 105, 30},
     "team lunch at the corner cafe",
     0,
     "The entity in the text is implicitly tied to the visual objects. "
     "Projection describes this pair best.",
     false, "0", "0",
     "Step by step: an ordinary group photo with a literal caption.",
     false, "1",
     "Superficial: everyday scene. Semantic: aligned. Sentiment: pleasant.",
     "1"},
    {"s11",
     {25, 25, 112},
     "first snowfall of the season",
     0,
     "Both modalities name the same entity. Concretization applies.",
     false, "I cannot assist with that.", "0",
     "Step by step: a calm winter scene described plainly.",
     false, "0",
     "Superficial: literal. Semantic: aligned. Sentiment: serene.",
     "0"},
    {"s12",
     {85, 107, 47},
     "morning fog on the trail",
     0,
     "Caption and photo agree completely. Restatement.",
     false, "0", "0",
     "Step by step: descriptive caption, no contrast to exploit.",
     false, "0",
     "Superficial: literal. Semantic: aligned. Sentiment: quiet.",
     "0"},
}};

// Hand-tabulated from the script answers above against the gold labels;
// committed as the oracle the end-to-end runs are checked against.
struct ExpectedOutcome {
  StrategyId strategy;
  std::uint64_t tp, fp, fn, tn;
  std::uint64_t invalid_parse;
  std::uint64_t truncated_rationales;
  std::uint64_t unparsed_relations;
};

inline constexpr std::array<ExpectedOutcome, 4> kExpectedOutcomes = {{
    {StrategyId::ZeroShot, 3, 2, 3, 4, 1, 0, 0},
    {StrategyId::ZeroShotCot, 5, 2, 1, 4, 0, 1, 0},
    {StrategyId::S3Cot, 3, 3, 3, 3, 0, 0, 0},
    {StrategyId::Ironic, 6, 1, 0, 5, 1, 1, 1},
}};

inline constexpr std::string_view kFixtureModel = "mock-model";

namespace detail {

inline void write_file(const std::filesystem::path& path,
                       std::string_view content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const unsigned char> content) {
  write_file(path, std::string_view(
                       reinterpret_cast<const char*>(content.data()),
                       content.size()));
}

inline nlohmann::json script_line(std::string_view sample_id, int turn,
                                  std::string_view response, bool truncated) {
  return nlohmann::json{{"sample_id", std::string(sample_id)},
                        {"turn", turn},
                        {"response", std::string(response)},
                        {"finish", truncated ? "length" : "stop"}};
}

}  // namespace detail

inline std::string mock_script_for(StrategyId strategy) {
  std::string out;
  for (const FixtureSample& s : kFixtureCorpus) {
    switch (strategy) {
      case StrategyId::ZeroShot:
        out += detail::script_line(s.id, 0, s.zero_shot_answer, false).dump();
        out += "\n";
        break;
      case StrategyId::ZeroShotCot:
        out += detail::script_line(s.id, 0, s.cot_rationale,
                                   s.cot_rationale_truncated)
                   .dump();
        out += "\n";
        out += detail::script_line(s.id, 1, s.cot_answer, false).dump();
        out += "\n";
        break;
      case StrategyId::S3Cot:
        out += detail::script_line(s.id, 0, s.s3_rationale, false).dump();
        out += "\n";
        out += detail::script_line(s.id, 1, s.s3_answer, false).dump();
        out += "\n";
        break;
      case StrategyId::Ironic:
        out += detail::script_line(s.id, 0, s.ironic_rationale,
                                   s.ironic_rationale_truncated)
                   .dump();
        out += "\n";
        out += detail::script_line(s.id, 1, s.ironic_answer, false).dump();
        out += "\n";
        break;
    }
  }
  return out;
}

// Reference-shaped manifest: the published class counts with placeholder
// captions and a shared placeholder image. Lets `validate` and the count
// checks run without redistributing any dataset content.
inline void write_reference_shaped_manifest(
    const std::filesystem::path& dir, Dataset dataset) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto expected = expected_counts(dataset);
  if (!expected) throw std::invalid_argument("no reference counts for custom");
  const auto png = solid_png(8, 8, 200, 200, 200);
  detail::write_file(dir / "placeholder.png",
                     std::span<const unsigned char>(png));

  const std::uint64_t pos = (*expected)[Label::Sarcastic];
  const std::uint64_t neg = (*expected)[Label::NonSarcastic];
  std::string out;
  char idbuf[64];
  for (std::uint64_t i = 0; i < pos + neg; ++i) {
    std::snprintf(idbuf, sizeof idbuf, "%s-%05llu",
                  std::string(dataset_name(dataset)).c_str(),
                  static_cast<unsigned long long>(i + 1));
    nlohmann::json j{
        {"id", idbuf},
        {"image", "placeholder.png"},
        {"text", "placeholder caption " + std::to_string(i + 1)},
        {"label", i < pos ? 1 : 0},
        {"dataset", std::string(dataset_name(dataset))}};
    out += j.dump();
    out += "\n";
  }
  detail::write_file(dir / (std::string(dataset_name(dataset)) + ".jsonl"),
                     out);
}

// Golden conversation transcripts for sample s01: every strategy's turn(s),
// rendered through the same path the runner uses.
inline void write_golden_conversations(const std::filesystem::path& dir,
                                       const Sample& s01,
                                       std::shared_ptr<const ImagePayload> img) {
  for (StrategyId strategy : kAllStrategies) {
    StrategyState st = make_state(strategy, s01, img);
    detail::write_file(dir / (std::string(strategy_name(strategy)) +
                              "_turn1.txt"),
                       render_conversation(next_request(st)));
    if (turn_count(strategy) == 2) {
      const FixtureSample& fx = kFixtureCorpus[0];
      std::string_view rationale = strategy == StrategyId::Ironic
                                       ? fx.ironic_rationale
                                       : strategy == StrategyId::ZeroShotCot
                                             ? fx.cot_rationale
                                             : fx.s3_rationale;
      st = ingest_response(std::move(st), std::string(rationale), false);
      detail::write_file(dir / (std::string(strategy_name(strategy)) +
                                "_turn2.txt"),
                         render_conversation(next_request(st)));
    }
  }
}

// Writes the complete offline fixture tree:
//   manifest.jsonl, images/, scripts/, reference/, expected/
// expected/report.md is produced by actually running the mock pipeline over
// the generated inputs, then frozen by committing the output.
inline void generate_fixtures(const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<Sample> samples;
  for (const FixtureSample& fx : kFixtureCorpus) {
    const auto png = solid_png(16, 16, fx.color[0], fx.color[1], fx.color[2]);
    detail::write_file(out_dir / "images" / (std::string(fx.id) + ".png"),
                       std::span<const unsigned char>(png));
    Sample s;
    s.id = std::string(fx.id);
    s.image_ref = "images/" + std::string(fx.id) + ".png";
    s.text = std::string(fx.caption);
    s.gold = label_from_code(fx.gold);
    s.dataset = Dataset::Custom;
    samples.push_back(std::move(s));
  }
  {
    std::string manifest;
    for (const Sample& s : samples) {
      manifest += sample_to_json(s).dump();
      manifest += "\n";
    }
    detail::write_file(out_dir / "manifest.jsonl", manifest);
  }

  for (StrategyId strategy : kAllStrategies) {
    detail::write_file(out_dir / "scripts" /
                           (std::string(strategy_name(strategy)) + ".jsonl"),
                       mock_script_for(strategy));
  }

  for (const ExpectedOutcome& e : kExpectedOutcomes) {
    nlohmann::json j{{"tp", e.tp},
                     {"fp", e.fp},
                     {"fn", e.fn},
                     {"tn", e.tn},
                     {"invalid_parse", e.invalid_parse},
                     {"truncated_rationales", e.truncated_rationales},
                     {"unparsed_relations", e.unparsed_relations}};
    detail::write_file(out_dir / "expected" /
                           ("confusion_" +
                            std::string(strategy_name(e.strategy)) + ".json"),
                       j.dump(2) + "\n");
  }

  write_reference_shaped_manifest(out_dir / "reference", Dataset::Mmsd2);
  write_reference_shaped_manifest(out_dir / "reference", Dataset::RedEval);

  {
    Manifest loaded = load_manifest((out_dir / "manifest.jsonl").string());
    ImageStore images;
    write_golden_conversations(out_dir / "expected" / "conversations",
                               loaded.samples[0],
                               images.get(loaded.samples[0]));
  }

  // The golden report: run all four strategies through the real pipeline.
  const fs::path run_dir =
      out_dir / ".build-report";  // scratch, removed below
  fs::create_directories(run_dir);
  std::vector<RunRecord> all_records;
  for (StrategyId strategy : kAllStrategies) {
    RunConfig cfg;
    cfg.manifest = (out_dir / "manifest.jsonl").string();
    cfg.strategy = strategy;
    cfg.model = std::string(kFixtureModel);
    cfg.backend = BackendKind::Mock;
    cfg.mock_script = (out_dir / "scripts" /
                       (std::string(strategy_name(strategy)) + ".jsonl"))
                          .string();
    cfg.out = (run_dir / (std::string(strategy_name(strategy)) + ".jsonl"))
                  .string();
    cfg.max_in_flight = 1;
    run(cfg);
    RecordsFile rf = load_records(cfg.out);
    all_records.insert(all_records.end(), rf.records.begin(),
                       rf.records.end());
  }
  EvalReport report = build_eval_report(all_records);
  detail::write_file(out_dir / "expected" / "report.md",
                     render_report(report));
  fs::remove_all(run_dir);
}

}  // namespace ironic
