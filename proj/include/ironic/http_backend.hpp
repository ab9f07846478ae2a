#pragma once

#include "ironic/backend.hpp"
#include "ironic/chat.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace ironic {

struct ParsedUrl {
  std::string base;  // scheme://host[:port], as httplib wants it
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw AuthError("endpoint URL needs a scheme: " + url);
  }
  std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// OpenAI-style chat-completions body. User content goes out as a plain
// string when it is a single text part, otherwise as a part array with
// images embedded as base64 data-URLs.
inline nlohmann::json wire_request_json(const Conversation& conv,
                                        const DecodingParams& params,
                                        const std::string& model,
                                        bool send_seed) {
  nlohmann::json messages = nlohmann::json::array();
  for (const Message& m : conv.messages()) {
    nlohmann::json msg{{"role", std::string(role_name(m.role))}};
    if (m.parts.size() == 1 && m.parts[0].kind == ContentPart::Kind::Text) {
      msg["content"] = m.parts[0].text;
    } else {
      nlohmann::json content = nlohmann::json::array();
      for (const ContentPart& p : m.parts) {
        if (p.kind == ContentPart::Kind::Text) {
          content.push_back({{"type", "text"}, {"text", p.text}});
        } else {
          content.push_back({{"type", "image_url"},
                             {"image_url", {{"url", p.image->encoded}}}});
        }
      }
      msg["content"] = std::move(content);
    }
    messages.push_back(std::move(msg));
  }
  nlohmann::json body{{"model", model},
                      {"messages", std::move(messages)},
                      {"temperature", params.temperature},
                      {"max_tokens", params.max_tokens}};
  if (send_seed) body["seed"] = params.seed;
  return body;
}

inline std::vector<std::string> default_refusal_patterns() {
  return {
      "i'm sorry, but i can't",
      "i am sorry, but i cannot",
      "i cannot assist with",
      "i can't assist with",
      "i am unable to help with",
  };
}

// Refusal-shaped replies count as content filtering in addition to explicit
// filter finish reasons, mirroring runs where the model rejects an input the
// provider lets through.
inline bool matches_refusal(std::string_view text,
                            const std::vector<std::string>& patterns) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  for (const std::string& p : patterns) {
    if (!p.empty() && lower.find(p) != std::string::npos) return true;
  }
  return false;
}

namespace detail {

class Semaphore {
 public:
  explicit Semaphore(int permits) : permits_(permits) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return permits_ > 0; });
    --permits_;
  }
  void release() {
    std::lock_guard lock(mu_);
    ++permits_;
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int permits_;
};

struct SemaphoreGuard {
  explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
  Semaphore& sem;
};

}  // namespace detail

struct EndpointConfig {
  std::string url;
  std::string api_key;
  // "Authorization" sends "Bearer <key>"; any other header name (e.g.
  // "api-key" for Azure-style deployments) sends the key verbatim.
  std::string auth_header = "Authorization";
};

struct LiveBackendOptions {
  EndpointConfig primary;
  std::optional<EndpointConfig> fallback;
  BackoffPolicy backoff;
  std::vector<std::string> refusal_patterns = default_refusal_patterns();
  int max_in_flight = 8;
  int timeout_sec = 120;
  bool send_seed = true;
  std::uint64_t jitter_seed = std::random_device{}();
  // Injectable for tests; defaults to a real sleep.
  std::function<void(std::chrono::milliseconds)> sleep_fn;
};

// Chat-completions client with bounded concurrency, exponential backoff with
// full jitter on transient failures, and a one-shot fallback endpoint for
// content-filtered requests.
class LiveBackend : public Backend {
 public:
  explicit LiveBackend(LiveBackendOptions opts)
      : opts_(std::move(opts)),
        sem_(std::max(1, opts_.max_in_flight)),
        rng_(opts_.jitter_seed) {
    if (!opts_.sleep_fn) {
      opts_.sleep_fn = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
      };
    }
  }

  CompletionResult complete(const Conversation& conv,
                            const DecodingParams& params,
                            const std::string& model,
                            const RequestMeta& meta) override {
    if (!conv.ends_in_user()) {
      throw BackendError("conversation must end in a user message");
    }
    const std::string body =
        wire_request_json(conv, params, model, opts_.send_seed).dump();

    Outcome primary = run_endpoint(opts_.primary, EndpointKind::Primary, body, meta);
    if (!primary.filtered) return std::move(primary.result);

    if (!opts_.fallback) {
      // No fallback configured: surface the filtered request as an empty
      // result rather than inventing text.
      CompletionResult r;
      r.finish = FinishReason::ContentFilter;
      r.endpoint_used = EndpointKind::Primary;
      r.latency_ms = primary.result.latency_ms;
      return r;
    }
    Outcome fb = run_endpoint(*opts_.fallback, EndpointKind::Fallback, body, meta);
    if (fb.filtered) {
      throw BackendError("content filtered on both endpoints for sample " +
                         meta.sample_id + " turn " + std::to_string(meta.turn));
    }
    return std::move(fb.result);
  }

  std::string_view kind() const override { return "live"; }
  std::uint64_t calls() const override { return calls_; }

 private:
  struct Outcome {
    CompletionResult result;
    bool filtered = false;
  };

  std::int64_t next_delay(int attempt) {
    std::lock_guard lock(rng_mu_);
    return opts_.backoff.jittered_delay_ms(attempt, rng_);
  }

  Outcome run_endpoint(const EndpointConfig& ep, EndpointKind kind,
                       const std::string& body, const RequestMeta& meta) {
    const ParsedUrl url = parse_url(ep.url);
    httplib::Client client(url.base);
    client.set_connection_timeout(std::min(opts_.timeout_sec, 15), 0);
    client.set_read_timeout(opts_.timeout_sec, 0);
    client.set_write_timeout(opts_.timeout_sec, 0);

    httplib::Headers headers;
    if (ep.auth_header == "Authorization") {
      headers.emplace("Authorization", "Bearer " + ep.api_key);
    } else {
      headers.emplace(ep.auth_header, ep.api_key);
    }

    std::string last_error;
    for (int attempt = 0; attempt < opts_.backoff.max_attempts; ++attempt) {
      if (attempt > 0) {
        opts_.sleep_fn(std::chrono::milliseconds(next_delay(attempt - 1)));
      }
      const auto started = std::chrono::steady_clock::now();
      httplib::Result res = [&] {
        detail::SemaphoreGuard guard(sem_);
        ++calls_;
        return client.Post(url.path, headers, body, "application/json");
      }();
      const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();

      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;  // transport error: retry
      }
      const int status = res->status;
      if (status == 401 || status == 403) {
        throw AuthError("endpoint " + ep.url + " rejected credentials (HTTP " +
                        std::to_string(status) + ")");
      }
      if (status == 404) {
        throw AuthError("endpoint " + ep.url + " not found (HTTP 404)");
      }
      if (status == 429 || status == 408 || status >= 500) {
        last_error = "HTTP " + std::to_string(status);
        continue;
      }
      if (status == 400 && is_filter_rejection(res->body)) {
        Outcome out;
        out.filtered = true;
        out.result.latency_ms = latency;
        return out;
      }
      if (status != 200) {
        throw BackendError("endpoint " + ep.url + " returned HTTP " +
                           std::to_string(status) + ": " +
                           res->body.substr(0, 200));
      }

      nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
        last_error = "malformed completion response";
        continue;
      }
      const auto& choice = j["choices"][0];
      Outcome out;
      out.result.endpoint_used = kind;
      out.result.latency_ms = latency;
      const auto& content = choice["message"]["content"];
      out.result.text = content.is_string() ? content.get<std::string>() : "";
      out.result.finish =
          finish_from_name(choice.value("finish_reason", "other"));
      const bool refusal_field =
          choice["message"].contains("refusal") &&
          choice["message"]["refusal"].is_string() &&
          !choice["message"]["refusal"].get<std::string>().empty();
      if (out.result.finish == FinishReason::ContentFilter || refusal_field ||
          matches_refusal(out.result.text, opts_.refusal_patterns)) {
        out.filtered = true;
      }
      return out;
    }
    throw BackendError("exhausted " +
                       std::to_string(opts_.backoff.max_attempts) +
                       " attempts against " + ep.url + " for sample " +
                       meta.sample_id + " turn " + std::to_string(meta.turn) +
                       " (last error: " + last_error + ")");
  }

  static bool is_filter_rejection(const std::string& body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("error")) return false;
    const auto& err = j["error"];
    return err.value("code", "") == "content_filter" ||
           err.value("code", "") == "ResponsibleAIPolicyViolation";
  }

  LiveBackendOptions opts_;
  detail::Semaphore sem_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace ironic
