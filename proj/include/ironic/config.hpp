#pragma once

#include "ironic/backend.hpp"
#include "ironic/strategies.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace ironic {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigValue =
    std::variant<std::string, long, double, bool, std::vector<std::string>>;

namespace detail {

inline std::string unescape_toml_string(std::string_view body,
                                        const std::string& where) {
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '\\') {
      out.push_back(body[i]);
      continue;
    }
    if (++i >= body.size()) throw ConfigError(where + ": dangling escape");
    switch (body[i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      default:
        throw ConfigError(where + ": unsupported escape \\" +
                          std::string(1, body[i]));
    }
  }
  return out;
}

inline std::string_view strip(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Minimal TOML-style reader: `key = value` lines with strings, numbers,
// booleans and single-line string arrays; `#` comments. Sections are not
// needed for this tool and are rejected explicitly.
inline std::map<std::string, ConfigValue> parse_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);

  std::map<std::string, ConfigValue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    std::string_view s = detail::strip(line);
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') {
      throw ConfigError(where + ": sections are not supported; use flat keys");
    }
    std::size_t eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected key = value");
    }
    std::string key(detail::strip(s.substr(0, eq)));
    std::string_view val = detail::strip(s.substr(eq + 1));
    if (key.empty() || val.empty()) {
      throw ConfigError(where + ": expected key = value");
    }

    if (val.front() == '"') {
      // Comments after the closing quote are allowed.
      std::size_t close = std::string_view::npos;
      for (std::size_t i = 1; i < val.size(); ++i) {
        if (val[i] == '\\') { ++i; continue; }
        if (val[i] == '"') { close = i; break; }
      }
      if (close == std::string_view::npos) {
        throw ConfigError(where + ": unterminated string");
      }
      std::string_view rest = detail::strip(val.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') {
        throw ConfigError(where + ": trailing characters after string");
      }
      out[key] = detail::unescape_toml_string(val.substr(1, close - 1), where);
      continue;
    }
    if (val.front() == '[') {
      if (val.back() != ']') {
        throw ConfigError(where + ": arrays must close on the same line");
      }
      std::vector<std::string> items;
      std::string_view body = val.substr(1, val.size() - 2);
      std::size_t i = 0;
      while (i < body.size()) {
        while (i < body.size() && (body[i] == ' ' || body[i] == '\t' ||
                                   body[i] == ',')) {
          ++i;
        }
        if (i >= body.size()) break;
        if (body[i] != '"') {
          throw ConfigError(where + ": only string arrays are supported");
        }
        std::size_t close = std::string_view::npos;
        for (std::size_t k = i + 1; k < body.size(); ++k) {
          if (body[k] == '\\') { ++k; continue; }
          if (body[k] == '"') { close = k; break; }
        }
        if (close == std::string_view::npos) {
          throw ConfigError(where + ": unterminated string in array");
        }
        items.push_back(detail::unescape_toml_string(
            body.substr(i + 1, close - i - 1), where));
        i = close + 1;
      }
      out[key] = std::move(items);
      continue;
    }
    {
      // Strip trailing comment from scalar values.
      std::size_t hash = val.find('#');
      if (hash != std::string_view::npos) {
        val = detail::strip(val.substr(0, hash));
      }
    }
    if (val == "true" || val == "false") {
      out[key] = (val == "true");
      continue;
    }
    std::string scalar(val);
    if (scalar.find_first_of(".eE") != std::string::npos &&
        scalar.find_first_not_of("+-.0123456789eE") == std::string::npos) {
      try {
        std::size_t used = 0;
        double d = std::stod(scalar, &used);
        if (used == scalar.size()) {
          out[key] = d;
          continue;
        }
      } catch (...) {
      }
    }
    try {
      std::size_t used = 0;
      long n = std::stol(scalar, &used, 10);
      if (used == scalar.size()) {
        out[key] = n;
        continue;
      }
    } catch (...) {
    }
    throw ConfigError(where + ": cannot parse value \"" + scalar + "\"");
  }
  return out;
}

enum class BackendKind { Live, Mock, Replay };

inline std::string_view backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::Live: return "live";
    case BackendKind::Mock: return "mock";
    case BackendKind::Replay: return "replay";
  }
  throw std::logic_error("bad backend kind");
}

inline BackendKind backend_kind_from_name(std::string_view name) {
  if (name == "live") return BackendKind::Live;
  if (name == "mock") return BackendKind::Mock;
  if (name == "replay") return BackendKind::Replay;
  throw ConfigError("unknown backend \"" + std::string(name) +
                    "\" (expected live, mock or replay)");
}

struct RunConfig {
  std::string manifest;
  StrategyId strategy = StrategyId::Ironic;
  std::string model = "gpt-4o";
  BackendKind backend = BackendKind::Mock;
  std::string out;  // records file

  std::string mock_script;            // mock backend
  std::string archive;                // replay backend
  std::string cache;                  // optional completion cache
  std::string endpoint;               // live backend
  std::string fallback_endpoint;      // optional content-filter fallback
  std::string api_key_env = "OPENAI_API_KEY";
  std::string fallback_api_key_env;
  std::string auth_header = "Authorization";
  std::string fallback_auth_header = "Authorization";
  std::vector<std::string> refusal_patterns;  // empty -> defaults

  DecodingParams params;
  int max_in_flight = 4;
  long limit = 0;  // 0 = all samples
  int request_timeout_sec = 120;

  // Test hook: stop dispatching new samples once this many records have been
  // appended in this process (simulates an interrupted run). 0 = disabled.
  std::uint64_t stop_after_records = 0;
};

namespace detail {

template <typename T>
inline T get_as(const std::map<std::string, ConfigValue>& kv,
                const std::string& key, const T& fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (const T* v = std::get_if<T>(&it->second)) return *v;
  // Integers are accepted where doubles are expected.
  if constexpr (std::is_same_v<T, double>) {
    if (const long* n = std::get_if<long>(&it->second)) {
      return static_cast<double>(*n);
    }
  }
  throw ConfigError("config key \"" + key + "\" has the wrong type");
}

}  // namespace detail

inline RunConfig run_config_from_file(const std::string& path) {
  auto kv = parse_config_file(path);
  RunConfig c;
  c.manifest = detail::get_as<std::string>(kv, "manifest", "");
  if (auto it = kv.find("strategy"); it != kv.end()) {
    c.strategy = strategy_from_name(std::get<std::string>(it->second));
  }
  c.model = detail::get_as<std::string>(kv, "model", c.model);
  if (auto it = kv.find("backend"); it != kv.end()) {
    c.backend = backend_kind_from_name(std::get<std::string>(it->second));
  }
  c.out = detail::get_as<std::string>(kv, "out", "");
  c.mock_script = detail::get_as<std::string>(kv, "mock_script", "");
  c.archive = detail::get_as<std::string>(kv, "archive", "");
  c.cache = detail::get_as<std::string>(kv, "cache", "");
  c.endpoint = detail::get_as<std::string>(kv, "endpoint", "");
  c.fallback_endpoint =
      detail::get_as<std::string>(kv, "fallback_endpoint", "");
  c.api_key_env = detail::get_as<std::string>(kv, "api_key_env", c.api_key_env);
  c.fallback_api_key_env =
      detail::get_as<std::string>(kv, "fallback_api_key_env", "");
  c.auth_header =
      detail::get_as<std::string>(kv, "auth_header", c.auth_header);
  c.fallback_auth_header = detail::get_as<std::string>(
      kv, "fallback_auth_header", c.fallback_auth_header);
  c.refusal_patterns = detail::get_as<std::vector<std::string>>(
      kv, "refusal_patterns", {});
  c.params.temperature =
      detail::get_as<double>(kv, "temperature", c.params.temperature);
  c.params.max_tokens = static_cast<int>(
      detail::get_as<long>(kv, "max_tokens", c.params.max_tokens));
  c.params.seed = detail::get_as<long>(kv, "seed", c.params.seed);
  c.max_in_flight = static_cast<int>(
      detail::get_as<long>(kv, "max_in_flight", c.max_in_flight));
  c.limit = detail::get_as<long>(kv, "limit", c.limit);
  c.request_timeout_sec = static_cast<int>(detail::get_as<long>(
      kv, "request_timeout_sec", c.request_timeout_sec));

  static const std::set<std::string> kKnown = {
      "manifest", "strategy", "model", "backend", "out", "mock_script",
      "archive", "cache", "endpoint", "fallback_endpoint", "api_key_env",
      "fallback_api_key_env", "auth_header", "fallback_auth_header",
      "refusal_patterns", "temperature", "max_tokens", "seed",
      "max_in_flight", "limit", "request_timeout_sec"};
  for (const auto& [key, _] : kv) {
    if (!kKnown.contains(key)) {
      throw ConfigError(path + ": unknown config key \"" + key + "\"");
    }
  }
  return c;
}

// Fails fast, before any request is issued.
inline void validate_run_config(const RunConfig& c) {
  if (c.manifest.empty()) throw ConfigError("manifest path is required");
  if (c.out.empty()) throw ConfigError("records output path is required");
  if (c.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (c.limit < 0) throw ConfigError("limit must be >= 0");
  if (c.params.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (c.params.temperature < 0) throw ConfigError("temperature must be >= 0");
  switch (c.backend) {
    case BackendKind::Mock:
      if (c.mock_script.empty()) {
        throw ConfigError("mock backend requires mock_script");
      }
      break;
    case BackendKind::Replay:
      if (c.archive.empty()) {
        throw ConfigError("replay backend requires archive");
      }
      break;
    case BackendKind::Live: {
      if (c.endpoint.empty()) {
        throw ConfigError("live backend requires endpoint");
      }
      if (c.api_key_env.empty()) {
        throw ConfigError("live backend requires api_key_env");
      }
      const char* key = std::getenv(c.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw ConfigError("environment variable " + c.api_key_env +
                          " is not set (API keys are never read from files)");
      }
      if (!c.fallback_endpoint.empty()) {
        const std::string env = c.fallback_api_key_env.empty()
                                    ? c.api_key_env
                                    : c.fallback_api_key_env;
        const char* fkey = std::getenv(env.c_str());
        if (fkey == nullptr || *fkey == '\0') {
          throw ConfigError("environment variable " + env +
                            " is not set for the fallback endpoint");
        }
      }
      break;
    }
  }
}

}  // namespace ironic
