#pragma once

#include "ironic/backend.hpp"
#include "ironic/config.hpp"
#include "ironic/corpus.hpp"
#include "ironic/http_backend.hpp"
#include "ironic/parse.hpp"
#include "ironic/records.hpp"
#include "ironic/strategies.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace ironic {

// Thrown by fault-injecting test backends to simulate a process crash; the
// coordinator lets it propagate instead of writing a failed record.
class RunAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunSummary {
  std::size_t manifest_samples = 0;
  std::size_t targeted = 0;
  std::size_t skipped_resume = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::uint64_t backend_calls = 0;
  bool stopped_early = false;
  std::string records_path;
};

inline std::shared_ptr<Backend> make_backend(const RunConfig& c) {
  switch (c.backend) {
    case BackendKind::Mock:
      return MockScriptBackend::load(c.mock_script);
    case BackendKind::Replay:
      return ReplayBackend::open(c.archive);
    case BackendKind::Live: {
      LiveBackendOptions opts;
      opts.primary.url = c.endpoint;
      opts.primary.api_key = std::getenv(c.api_key_env.c_str());
      opts.primary.auth_header = c.auth_header;
      if (!c.fallback_endpoint.empty()) {
        EndpointConfig fb;
        fb.url = c.fallback_endpoint;
        const std::string env = c.fallback_api_key_env.empty()
                                    ? c.api_key_env
                                    : c.fallback_api_key_env;
        fb.api_key = std::getenv(env.c_str());
        fb.auth_header = c.fallback_auth_header;
        opts.fallback = std::move(fb);
      }
      if (!c.refusal_patterns.empty()) {
        opts.refusal_patterns = c.refusal_patterns;
      }
      opts.max_in_flight = c.max_in_flight;
      opts.timeout_sec = c.request_timeout_sec;
      return std::make_shared<LiveBackend>(std::move(opts));
    }
  }
  throw ConfigError("bad backend kind");
}

namespace detail {

inline RunRecord process_sample(const Sample& sample, const RunConfig& config,
                                Backend& backend, ImageStore& images,
                                std::string_view backend_kind) {
  RunRecord rec;
  rec.sample_id = sample.id;
  rec.dataset = sample.dataset;
  rec.model = config.model;
  rec.strategy = config.strategy;
  rec.params = config.params;
  rec.backend_kind = std::string(backend_kind);
  rec.gold = sample.gold;
  rec.started_at = utc_timestamp();
  try {
    auto image = images.get(sample);
    rec.image_bytes = image->bytes.size();
    StrategyState state = make_state(config.strategy, sample, image);
    while (!state.done) {
      const Conversation& conv = next_request(state);
      RequestMeta meta{sample.id, state.turn_index};
      CompletionResult res =
          backend.complete(conv, config.params, config.model, meta);
      rec.turns.push_back({res.text, res.finish, res.endpoint_used, res.cached,
                           res.latency_ms});
      state = ingest_response(std::move(state), res.text,
                              res.finish == FinishReason::Length);
    }
    rec.rationale_truncated = state.rationale_truncated;
    rec.prediction = parse_binary(*state.final_raw);
    if (config.strategy == StrategyId::Ironic) {
      rec.relation = parse_relation(state.rationale.value_or(""),
                                    state.rationale_truncated);
    }
  } catch (const RunAborted&) {
    throw;
  } catch (const AuthError&) {
    throw;  // misconfiguration: every remaining sample would fail the same way
  } catch (const ReplayMiss&) {
    throw;  // fixture drift must surface, not turn into failed records
  } catch (const BackendError& e) {
    rec.failed = true;
    rec.error = e.what();
  } catch (const ImageError& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.finished_at = utc_timestamp();
  return rec;
}

}  // namespace detail

// Drives every targeted sample through the configured strategy with at most
// max_in_flight machines advancing concurrently. Records append as samples
// finish; on restart, samples that already have a record are skipped and
// cached turns are reused, so an interrupted run picks up where it stopped.
inline RunSummary run(const RunConfig& config,
                      std::shared_ptr<Backend> backend_override = nullptr) {
  namespace fs = std::filesystem;
  validate_run_config(config);

  Manifest manifest = load_manifest(config.manifest);
  RunSummary summary;
  summary.records_path = config.out;
  summary.manifest_samples = manifest.samples.size();

  std::size_t take = manifest.samples.size();
  if (config.limit > 0) {
    take = std::min(take, static_cast<std::size_t>(config.limit));
  }
  summary.targeted = take;

  std::set<std::string> done_ids;
  if (fs::exists(config.out)) {
    RecordsFile existing = load_records(config.out);
    if (existing.torn_tail) {
      fs::resize_file(config.out, existing.valid_bytes);
    }
    for (const RunRecord& r : existing.records) {
      if (r.strategy != config.strategy || r.model != config.model ||
          !(r.params == config.params)) {
        throw ConfigError(config.out +
                          " already holds records from a different run "
                          "(strategy/model/params mismatch)");
      }
      done_ids.insert(r.sample_id);
    }
  }

  std::shared_ptr<Backend> base =
      backend_override ? std::move(backend_override) : make_backend(config);
  const std::string backend_kind(base->kind());
  std::shared_ptr<Backend> backend = base;
  std::string cache_path = config.cache;
  if (cache_path.empty() && config.backend == BackendKind::Live) {
    // Live completions are always cached so an interrupted run never repays
    // for a turn it already received.
    cache_path = config.out + ".cache.jsonl";
  }
  if (!cache_path.empty()) {
    backend = std::make_shared<CachingBackend>(
        base, CacheStore::open(cache_path, /*create=*/true));
  }

  std::vector<const Sample*> pending;
  for (std::size_t i = 0; i < take; ++i) {
    const Sample& s = manifest.samples[i];
    if (done_ids.contains(s.id)) {
      ++summary.skipped_resume;
    } else {
      pending.push_back(&s);
    }
  }

  RecordsWriter writer(config.out);
  ImageStore images;

  std::atomic<std::size_t> next{0};
  std::atomic<std::uint64_t> appended{0};
  std::atomic<std::size_t> completed{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<bool> stop{false};
  std::mutex fatal_mu;
  std::exception_ptr fatal;

  auto work = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) break;
      try {
        RunRecord rec = detail::process_sample(*pending[i], config, *backend,
                                               images, backend_kind);
        writer.append(rec);
        rec.failed ? ++failed : ++completed;
        if (config.stop_after_records > 0 &&
            appended.fetch_add(1) + 1 >= config.stop_after_records) {
          stop.store(true);
        }
      } catch (...) {
        {
          std::lock_guard lock(fatal_mu);
          if (!fatal) fatal = std::current_exception();
        }
        stop.store(true);
        break;
      }
    }
  };

  const int n_workers = static_cast<int>(std::min<std::size_t>(
      std::max(1, config.max_in_flight), std::max<std::size_t>(pending.size(), 1)));
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (int i = 0; i < n_workers; ++i) workers.emplace_back(work);
  for (auto& t : workers) t.join();
  if (fatal) std::rethrow_exception(fatal);

  summary.completed = completed.load();
  summary.failed = failed.load();
  summary.stopped_early = config.stop_after_records > 0 &&
                          appended.load() >= config.stop_after_records;
  summary.backend_calls = base->calls();
  return summary;
}

}  // namespace ironic
