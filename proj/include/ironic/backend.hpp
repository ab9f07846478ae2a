#pragma once

#include "ironic/chat.hpp"
#include "ironic/encoding.hpp"
#include "ironic/jsonl.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace ironic {

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 512;
  long seed = 42;

  bool operator==(const DecodingParams&) const = default;
};

enum class FinishReason { Stop, Length, ContentFilter, Other };

inline std::string_view finish_name(FinishReason f) {
  switch (f) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::ContentFilter: return "content_filter";
    case FinishReason::Other: return "other";
  }
  throw std::logic_error("bad finish reason");
}

inline FinishReason finish_from_name(std::string_view name) {
  if (name == "stop") return FinishReason::Stop;
  if (name == "length") return FinishReason::Length;
  if (name == "content_filter") return FinishReason::ContentFilter;
  return FinishReason::Other;
}

enum class EndpointKind { Primary, Fallback, Mock };

inline std::string_view endpoint_name(EndpointKind e) {
  switch (e) {
    case EndpointKind::Primary: return "primary";
    case EndpointKind::Fallback: return "fallback";
    case EndpointKind::Mock: return "mock";
  }
  throw std::logic_error("bad endpoint kind");
}

inline EndpointKind endpoint_from_name(std::string_view name) {
  if (name == "primary") return EndpointKind::Primary;
  if (name == "fallback") return EndpointKind::Fallback;
  return EndpointKind::Mock;
}

struct CompletionResult {
  std::string text;
  FinishReason finish = FinishReason::Stop;
  EndpointKind endpoint_used = EndpointKind::Mock;
  std::int64_t latency_ms = 0;
  bool cached = false;
};

// Carried alongside each request purely for script lookup and diagnostics;
// never part of the cache key.
struct RequestMeta {
  std::string sample_id;
  int turn = 0;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fail-fast conditions (bad credentials, bad endpoint); retrying or moving
// on to the next sample would just repeat the failure.
class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

// Replay archive has no entry for a request; signals fixture/manifest drift.
class ReplayMiss : public BackendError {
 public:
  using BackendError::BackendError;
};

// Canonical request serialization: role plus parts in order, text verbatim,
// images reduced to their byte digest. Any byte change anywhere changes the
// key; metadata (sample id, turn) does not participate.
inline nlohmann::json canonical_request_json(const Conversation& conv,
                                             const DecodingParams& params,
                                             const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const Message& m : conv.messages()) {
    nlohmann::json parts = nlohmann::json::array();
    for (const ContentPart& p : m.parts) {
      if (p.kind == ContentPart::Kind::Text) {
        parts.push_back({{"text", p.text}});
      } else {
        parts.push_back({{"image", sha256_hex(std::span<const unsigned char>(
                                       p.image->bytes))}});
      }
    }
    messages.push_back(
        {{"role", std::string(role_name(m.role))}, {"parts", parts}});
  }
  return nlohmann::json{{"model", model},
                        {"params",
                         {{"temperature", params.temperature},
                          {"max_tokens", params.max_tokens},
                          {"seed", params.seed}}},
                        {"messages", messages}};
}

inline std::string cache_key(const Conversation& conv,
                             const DecodingParams& params,
                             const std::string& model) {
  return sha256_hex(canonical_request_json(conv, params, model).dump());
}

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const Conversation& conv,
                                    const DecodingParams& params,
                                    const std::string& model,
                                    const RequestMeta& meta) = 0;
  virtual std::string_view kind() const = 0;
  // Completions actually produced (network round-trips or scripted answers);
  // cache hits do not count.
  virtual std::uint64_t calls() const = 0;
};

// Append-only key -> result archive, shared as the completion cache and as
// the replay fixture format. Reads are concurrent; writes are serialized and
// first-writer-wins.
class CacheStore {
 public:
  // create=true opens (and appends to) the backing file, creating it if
  // missing; create=false loads an existing archive read-only.
  static std::shared_ptr<CacheStore> open(const std::string& path,
                                          bool create) {
    auto store = std::make_shared<CacheStore>();
    store->path_ = path;
    namespace fs = std::filesystem;
    if (fs::exists(path)) {
      JsonlFile file = read_jsonl(path, /*strict=*/false);
      for (const auto& j : file.rows) {
        CompletionResult r;
        const auto& res = j.at("result");
        r.text = res.at("text").get<std::string>();
        r.finish = finish_from_name(res.at("finish").get<std::string>());
        r.endpoint_used =
            endpoint_from_name(res.value("endpoint", "primary"));
        r.latency_ms = res.value("latency_ms", std::int64_t{0});
        store->entries_.emplace(j.at("key").get<std::string>(), std::move(r));
      }
      if (file.torn_tail) {
        fs::resize_file(path, file.valid_bytes);  // drop interrupted append
      }
    } else if (!create) {
      throw BackendError("archive not found: " + path);
    }
    if (create) {
      const auto parent = fs::path(path).parent_path();
      if (!parent.empty()) fs::create_directories(parent);
      store->out_.open(path, std::ios::binary | std::ios::app);
      if (!store->out_) throw BackendError("cannot open cache " + path);
    }
    return store;
  }

  std::optional<CompletionResult> lookup(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const std::string& key, const RequestMeta& meta,
              const std::string& model, const CompletionResult& result) {
    std::lock_guard lock(mu_);
    if (entries_.contains(key)) return;  // first writer wins
    entries_.emplace(key, result);
    if (out_.is_open()) {
      nlohmann::json j{
          {"key", key},
          {"request_meta",
           {{"sample_id", meta.sample_id}, {"turn", meta.turn}, {"model", model}}},
          {"result",
           {{"text", result.text},
            {"finish", std::string(finish_name(result.finish))},
            {"endpoint", std::string(endpoint_name(result.endpoint_used))},
            {"latency_ms", result.latency_ms}}}};
      out_ << j.dump() << "\n";
      out_.flush();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, CompletionResult> entries_;
  std::string path_;
  std::ofstream out_;
};

// Scripted backend: one response per (sample_id, turn), loaded from the mock
// script JSONL.
class MockScriptBackend : public Backend {
 public:
  struct Entry {
    std::string text;
    FinishReason finish = FinishReason::Stop;
  };

  static std::shared_ptr<MockScriptBackend> load(const std::string& path) {
    auto b = std::make_shared<MockScriptBackend>();
    JsonlFile file = read_jsonl(path, /*strict=*/true);
    std::size_t line_no = 0;
    for (const auto& j : file.rows) {
      ++line_no;
      try {
        Entry e;
        e.text = j.at("response").get<std::string>();
        e.finish = finish_from_name(j.value("finish", "stop"));
        b->add(j.at("sample_id").get<std::string>(), j.at("turn").get<int>(),
               std::move(e));
      } catch (const nlohmann::json::exception& e) {
        throw JsonlError(path, line_no, e.what());
      }
    }
    return b;
  }

  CompletionResult complete(const Conversation& conv, const DecodingParams&,
                            const std::string&,
                            const RequestMeta& meta) override {
    if (!conv.ends_in_user()) {
      throw BackendError("conversation must end in a user message");
    }
    auto it = script_.find({meta.sample_id, meta.turn});
    if (it == script_.end()) {
      throw BackendError("mock script has no response for sample " +
                         meta.sample_id + " turn " +
                         std::to_string(meta.turn));
    }
    ++calls_;
    CompletionResult r;
    r.text = it->second.text;
    r.finish = it->second.finish;
    r.endpoint_used = EndpointKind::Mock;
    return r;
  }

  std::string_view kind() const override { return "mock"; }
  std::uint64_t calls() const override { return calls_; }

  // Setup only; the script is immutable once the backend is shared.
  void add(std::string sample_id, int turn, Entry entry) {
    script_[{std::move(sample_id), turn}] = std::move(entry);
  }

 private:
  std::map<std::pair<std::string, int>, Entry> script_;
  std::atomic<std::uint64_t> calls_{0};
};

// Answers exclusively from a recorded archive; a missing key means the
// fixture and the manifest have drifted apart.
class ReplayBackend : public Backend {
 public:
  static std::shared_ptr<ReplayBackend> open(const std::string& archive_path) {
    auto b = std::make_shared<ReplayBackend>();
    b->store_ = CacheStore::open(archive_path, /*create=*/false);
    return b;
  }

  CompletionResult complete(const Conversation& conv,
                            const DecodingParams& params,
                            const std::string& model,
                            const RequestMeta& meta) override {
    const std::string key = cache_key(conv, params, model);
    auto hit = store_->lookup(key);
    if (!hit) {
      throw ReplayMiss("replay archive has no completion for sample " +
                       meta.sample_id + " turn " + std::to_string(meta.turn) +
                       " (key " + key + ")");
    }
    ++calls_;
    hit->cached = true;
    return *hit;
  }

  std::string_view kind() const override { return "replay"; }
  std::uint64_t calls() const override { return calls_; }

 private:
  std::shared_ptr<CacheStore> store_;
  std::atomic<std::uint64_t> calls_{0};
};

// Read-through cache in front of any backend. Results are written to the
// store before being returned, so an interrupted run can resume mid-sample
// without repeating completed turns.
class CachingBackend : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner,
                 std::shared_ptr<CacheStore> store)
      : inner_(std::move(inner)), store_(std::move(store)) {}

  CompletionResult complete(const Conversation& conv,
                            const DecodingParams& params,
                            const std::string& model,
                            const RequestMeta& meta) override {
    const std::string key = cache_key(conv, params, model);
    if (auto hit = store_->lookup(key)) {
      hit->cached = true;
      return *hit;
    }
    CompletionResult fresh = inner_->complete(conv, params, model, meta);
    store_->insert(key, meta, model, fresh);
    fresh.cached = false;
    return fresh;
  }

  std::string_view kind() const override { return inner_->kind(); }
  std::uint64_t calls() const override { return inner_->calls(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<CacheStore> store_;
};

// Exponential backoff with full jitter: attempt k waits uniform
// [0, base * factor^k], never beyond max_delay.
struct BackoffPolicy {
  std::int64_t base_ms = 1000;
  double factor = 2.0;
  int max_attempts = 5;
  std::int64_t max_delay_ms = 60000;

  std::int64_t ceiling_ms(int attempt) const {
    double cap = static_cast<double>(base_ms);
    for (int i = 0; i < attempt; ++i) cap *= factor;
    return std::min(max_delay_ms,
                    static_cast<std::int64_t>(std::min<double>(cap, 9e18)));
  }

  template <typename Rng>
  std::int64_t jittered_delay_ms(int attempt, Rng& rng) const {
    std::uniform_int_distribution<std::int64_t> dist(0, ceiling_ms(attempt));
    return dist(rng);
  }
};

}  // namespace ironic
