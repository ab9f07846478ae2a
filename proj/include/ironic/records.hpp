#pragma once

#include "ironic/backend.hpp"
#include "ironic/corpus.hpp"
#include "ironic/jsonl.hpp"
#include "ironic/parse.hpp"
#include "ironic/strategies.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ironic {

struct TurnRecord {
  std::string raw;
  FinishReason finish = FinishReason::Stop;
  EndpointKind endpoint = EndpointKind::Mock;
  bool cached = false;
  std::int64_t latency_ms = 0;
};

// One line per completed (or failed) sample; self-describing so any set of
// record files can be aggregated into a report later.
struct RunRecord {
  std::string sample_id;
  Dataset dataset = Dataset::Custom;
  std::string model;
  StrategyId strategy = StrategyId::ZeroShot;
  DecodingParams params;
  std::string backend_kind;
  std::vector<TurnRecord> turns;
  std::optional<CoherenceRelation> relation;  // IRONIC runs only
  bool rationale_truncated = false;
  std::optional<Prediction> prediction;  // absent when failed
  Label gold = Label::NonSarcastic;
  // Image bytes as sent (no resizing or re-encoding happens anywhere).
  std::uint64_t image_bytes = 0;
  bool failed = false;
  std::string error;
  std::string started_at;
  std::string finished_at;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json record_to_json(const RunRecord& r) {
  nlohmann::json turns = nlohmann::json::array();
  for (const TurnRecord& t : r.turns) {
    turns.push_back({{"raw", t.raw},
                     {"finish", std::string(finish_name(t.finish))},
                     {"endpoint", std::string(endpoint_name(t.endpoint))},
                     {"cached", t.cached},
                     {"latency_ms", t.latency_ms}});
  }
  nlohmann::json j{{"sample_id", r.sample_id},
                   {"dataset", std::string(dataset_name(r.dataset))},
                   {"model", r.model},
                   {"strategy", std::string(strategy_name(r.strategy))},
                   {"params",
                    {{"temperature", r.params.temperature},
                     {"max_tokens", r.params.max_tokens},
                     {"seed", r.params.seed}}},
                   {"backend", r.backend_kind},
                   {"turns", turns},
                   {"rationale_truncated", r.rationale_truncated},
                   {"gold", label_code(r.gold)},
                   {"image_bytes", r.image_bytes},
                   {"failed", r.failed},
                   {"started_at", r.started_at},
                   {"finished_at", r.finished_at}};
  if (r.relation) j["relation"] = std::string(relation_name(*r.relation));
  if (r.prediction) {
    j["prediction"] = {{"label", label_code(r.prediction->label)},
                       {"valid", r.prediction->valid},
                       {"raw", r.prediction->raw}};
  }
  if (r.failed) j["error"] = r.error;
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.dataset = dataset_from_name(j.at("dataset").get<std::string>());
  r.model = j.at("model").get<std::string>();
  r.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  const auto& p = j.at("params");
  r.params.temperature = p.at("temperature").get<double>();
  r.params.max_tokens = p.at("max_tokens").get<int>();
  r.params.seed = p.at("seed").get<long>();
  r.backend_kind = j.value("backend", "unknown");
  for (const auto& t : j.at("turns")) {
    TurnRecord tr;
    tr.raw = t.at("raw").get<std::string>();
    tr.finish = finish_from_name(t.at("finish").get<std::string>());
    tr.endpoint = endpoint_from_name(t.value("endpoint", "mock"));
    tr.cached = t.value("cached", false);
    tr.latency_ms = t.value("latency_ms", std::int64_t{0});
    r.turns.push_back(std::move(tr));
  }
  if (j.contains("relation")) {
    auto cr = relation_from_name(j["relation"].get<std::string>());
    if (!cr) throw std::invalid_argument("unknown relation in record");
    r.relation = *cr;
  }
  r.rationale_truncated = j.value("rationale_truncated", false);
  if (j.contains("prediction")) {
    Prediction pred;
    pred.label = label_from_code(j["prediction"].at("label").get<int>());
    pred.valid = j["prediction"].at("valid").get<bool>();
    pred.raw = j["prediction"].value("raw", "");
    r.prediction = std::move(pred);
  }
  r.gold = label_from_code(j.at("gold").get<int>());
  r.image_bytes = j.value("image_bytes", std::uint64_t{0});
  r.failed = j.value("failed", false);
  r.error = j.value("error", "");
  r.started_at = j.value("started_at", "");
  r.finished_at = j.value("finished_at", "");
  return r;
}

struct RecordsFile {
  std::vector<RunRecord> records;
  std::size_t valid_bytes = 0;
  bool torn_tail = false;
};

// Tolerates a torn final line (interrupted append); the caller decides
// whether to truncate the file back to valid_bytes before resuming.
inline RecordsFile load_records(const std::string& path) {
  RecordsFile out;
  JsonlFile file = read_jsonl(path, /*strict=*/false);
  out.valid_bytes = file.valid_bytes;
  out.torn_tail = file.torn_tail;
  std::size_t line_no = 0;
  for (const auto& j : file.rows) {
    ++line_no;
    try {
      out.records.push_back(record_from_json(j));
    } catch (const std::exception& e) {
      throw JsonlError(path, line_no, e.what());
    }
  }
  return out;
}

// Serialized single-line appends; one flush per record keeps the file valid
// JSONL at every instant a crash could happen.
class RecordsWriter {
 public:
  explicit RecordsWriter(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw std::runtime_error("cannot open records file " + path);
  }

  void append(const RunRecord& r) {
    const std::string line = record_to_json(r).dump() + "\n";
    std::lock_guard lock(mu_);
    out_ << line;
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace ironic
