#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ironic {

class JsonlError : public std::runtime_error {
 public:
  JsonlError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct JsonlFile {
  std::vector<nlohmann::json> rows;
  // Byte offset just past the last well-formed line. When torn_tail is set the
  // file ends in a partial record (interrupted append) that was dropped.
  std::size_t valid_bytes = 0;
  bool torn_tail = false;
};

// One JSON object per line. Blank lines are skipped. In strict mode any
// malformed line is an error; otherwise a malformed *final* line is treated
// as a torn append and dropped, while a malformed interior line still throws.
inline JsonlFile read_jsonl(const std::string& path, bool strict = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  JsonlFile out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool has_newline = !in.eof();
    const std::size_t line_end = offset + line.size() + (has_newline ? 1 : 0);
    std::string_view body(line);
    if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
    if (body.find_first_not_of(" \t") == std::string_view::npos) {
      offset = line_end;
      out.valid_bytes = offset;
      continue;
    }
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      if (!strict && in.peek() == std::ifstream::traits_type::eof()) {
        out.torn_tail = true;
        return out;
      }
      throw JsonlError(path, line_no, "malformed JSON object");
    }
    out.rows.push_back(std::move(j));
    offset = line_end;
    out.valid_bytes = offset;
  }
  return out;
}

}  // namespace ironic
