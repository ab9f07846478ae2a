#pragma once

#include "ironic/encoding.hpp"
#include "ironic/jsonl.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ironic {

// Binary gold/prediction label. The integer codes are part of the prompt
// contract (the model is asked to answer 0 or 1), so they are fixed.
enum class Label : int { NonSarcastic = 0, Sarcastic = 1 };

inline int label_code(Label l) { return static_cast<int>(l); }

inline Label label_from_code(int code) {
  if (code == 0) return Label::NonSarcastic;
  if (code == 1) return Label::Sarcastic;
  throw std::invalid_argument("unknown label code " + std::to_string(code));
}

enum class Dataset { Mmsd2, RedEval, Custom };

inline std::string_view dataset_name(Dataset d) {
  switch (d) {
    case Dataset::Mmsd2: return "mmsd2";
    case Dataset::RedEval: return "redeval";
    case Dataset::Custom: return "custom";
  }
  throw std::logic_error("bad dataset");
}

inline Dataset dataset_from_name(std::string_view name) {
  if (name == "mmsd2") return Dataset::Mmsd2;
  if (name == "redeval") return Dataset::RedEval;
  if (name == "custom") return Dataset::Custom;
  throw std::invalid_argument("unknown dataset tag \"" + std::string(name) +
                              "\"");
}

struct Sample {
  std::string id;
  std::string image_ref;  // filesystem path (resolved) or URL
  std::string text;
  Label gold = Label::NonSarcastic;
  Dataset dataset = Dataset::Custom;

  bool operator==(const Sample&) const = default;
};

struct ImagePayload {
  std::vector<unsigned char> bytes;
  std::string mime;
  std::string encoded;  // base64 data-URL
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

inline bool is_url(std::string_view ref) {
  return ref.starts_with("http://") || ref.starts_with("https://");
}

// Magic-byte sniffing, with the file extension as a fallback only.
inline std::optional<std::string> sniff_mime(
    std::span<const unsigned char> bytes, std::string_view ref) {
  auto starts = [&](std::initializer_list<int> magic, std::size_t at = 0) {
    if (bytes.size() < at + magic.size()) return false;
    std::size_t i = at;
    for (int m : magic) {
      if (bytes[i++] != static_cast<unsigned char>(m)) return false;
    }
    return true;
  };
  if (starts({0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a})) return "image/png";
  if (starts({0xff, 0xd8, 0xff})) return "image/jpeg";
  if (starts({'G', 'I', 'F', '8', '7', 'a'}) ||
      starts({'G', 'I', 'F', '8', '9', 'a'})) {
    return "image/gif";
  }
  if (starts({'R', 'I', 'F', 'F'}) && starts({'W', 'E', 'B', 'P'}, 8)) {
    return "image/webp";
  }
  std::string ext = std::filesystem::path(std::string(ref)).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return std::nullopt;
}

inline ImagePayload make_image_payload(std::vector<unsigned char> bytes,
                                       std::string_view ref) {
  if (bytes.empty()) {
    throw ImageError("unsupported media type: " + std::string(ref) +
                     " is empty");
  }
  auto mime = sniff_mime(bytes, ref);
  if (!mime) {
    throw ImageError("unsupported media type for " + std::string(ref));
  }
  ImagePayload p;
  p.mime = *mime;
  p.encoded = "data:" + *mime + ";base64," + base64_encode(bytes);
  p.bytes = std::move(bytes);
  return p;
}

inline ImagePayload load_image_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot read image " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return make_image_payload(std::move(bytes), path);
}

inline ImagePayload load_image(const Sample& sample) {
  if (is_url(sample.image_ref)) {
    throw ImageError("remote image fetch not supported here: " +
                     sample.image_ref + " (embed a local file instead)");
  }
  return load_image_file(sample.image_ref);
}

// Shared read-through image cache. Each file is read exactly once per store
// lifetime regardless of how many workers ask for it; loads are serialized
// under the store lock so concurrent misses cannot double-read.
class ImageStore {
 public:
  std::shared_ptr<const ImagePayload> get(const Sample& sample) {
    std::lock_guard lock(mu_);
    auto it = cache_.find(sample.image_ref);
    if (it != cache_.end()) return it->second;
    auto loaded = std::make_shared<const ImagePayload>(load_image(sample));
    ++reads_;
    return cache_.emplace(sample.image_ref, std::move(loaded)).first->second;
  }

  std::uint64_t file_reads() const {
    std::lock_guard lock(mu_);
    return reads_;
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const ImagePayload>> cache_;
  std::uint64_t reads_ = 0;
};

struct Manifest {
  std::vector<Sample> samples;
  std::vector<std::string> warnings;
};

struct ManifestOptions {
  // Verify that every image_ref resolves (file exists / URL well-formed).
  bool check_images = false;
};

inline Manifest load_manifest(const std::string& path,
                              const ManifestOptions& opts = {}) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw CorpusError("manifest not found: " + path);
  const fs::path base = fs::path(path).parent_path();

  JsonlFile file = read_jsonl(path, /*strict=*/true);
  Manifest out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& j : file.rows) {
    ++line_no;
    auto fail = [&](const std::string& what) -> CorpusError {
      return CorpusError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    static const std::set<std::string> kKnown = {"id", "image", "text",
                                                 "label", "dataset"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!kKnown.contains(it.key())) {
        out.warnings.push_back(path + ":" + std::to_string(line_no) +
                               ": unknown field \"" + it.key() + "\" ignored");
      }
    }
    Sample s;
    if (!j.contains("id") || !j["id"].is_string()) {
      throw fail("missing or non-string \"id\"");
    }
    s.id = j["id"].get<std::string>();
    if (!seen.insert(s.id).second) throw fail("duplicate id \"" + s.id + "\"");
    if (!j.contains("image") || !j["image"].is_string()) {
      throw fail("missing or non-string \"image\"");
    }
    s.image_ref = j["image"].get<std::string>();
    if (!is_url(s.image_ref) && fs::path(s.image_ref).is_relative()) {
      s.image_ref = (base / s.image_ref).lexically_normal().string();
    }
    if (!j.contains("text") || !j["text"].is_string()) {
      throw fail("missing or non-string \"text\"");
    }
    s.text = j["text"].get<std::string>();
    if (s.text.empty()) throw fail("empty \"text\"");
    if (!j.contains("label") || !j["label"].is_number_integer()) {
      throw fail("missing or non-integer \"label\"");
    }
    try {
      s.gold = label_from_code(j["label"].get<int>());
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
    if (j.contains("dataset")) {
      if (!j["dataset"].is_string()) throw fail("non-string \"dataset\"");
      try {
        s.dataset = dataset_from_name(j["dataset"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw fail(e.what());
      }
    } else {
      s.dataset = Dataset::Custom;
      out.warnings.push_back(path + ":" + std::to_string(line_no) +
                             ": missing \"dataset\", assuming \"custom\"");
    }
    if (opts.check_images && !is_url(s.image_ref) &&
        !fs::exists(s.image_ref)) {
      throw fail("image not found: " + s.image_ref);
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::json sample_to_json(const Sample& s) {
  return nlohmann::json{{"id", s.id},
                        {"image", s.image_ref},
                        {"text", s.text},
                        {"label", label_code(s.gold)},
                        {"dataset", std::string(dataset_name(s.dataset))}};
}

inline void write_manifest(const std::string& path,
                           std::span<const Sample> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write " + path);
  for (const Sample& s : samples) out << sample_to_json(s).dump() << "\n";
}

struct CountCheck {
  Label label;
  std::uint64_t expected = 0;
  std::uint64_t actual = 0;
};

struct CountReport {
  std::vector<CountCheck> rows;
  bool pass = true;
};

inline CountReport validate_counts(
    std::span<const Sample> samples,
    const std::map<Label, std::uint64_t>& expected) {
  std::map<Label, std::uint64_t> actual;
  for (const Sample& s : samples) ++actual[s.gold];
  CountReport report;
  for (Label l : {Label::NonSarcastic, Label::Sarcastic}) {
    CountCheck row{l, 0, 0};
    if (auto it = expected.find(l); it != expected.end()) row.expected = it->second;
    if (auto it = actual.find(l); it != actual.end()) row.actual = it->second;
    if (row.expected != row.actual) report.pass = false;
    report.rows.push_back(row);
  }
  return report;
}

// Published test-split sizes for the two reference datasets.
inline std::optional<std::map<Label, std::uint64_t>> expected_counts(
    Dataset d) {
  switch (d) {
    case Dataset::Mmsd2:
      return std::map<Label, std::uint64_t>{{Label::Sarcastic, 1037},
                                            {Label::NonSarcastic, 1372}};
    case Dataset::RedEval:
      return std::map<Label, std::uint64_t>{{Label::Sarcastic, 395},
                                            {Label::NonSarcastic, 609}};
    case Dataset::Custom:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace ironic
