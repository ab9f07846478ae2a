#pragma once

#include "ironic/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ironic {

enum class CoherenceRelation {
  Insertion,
  Concretization,
  Projection,
  Restatement,
  Extension,
  Unparsed,
};

inline constexpr std::array<CoherenceRelation, 5> kNamedRelations = {
    CoherenceRelation::Insertion,   CoherenceRelation::Concretization,
    CoherenceRelation::Projection,  CoherenceRelation::Restatement,
    CoherenceRelation::Extension,
};

inline std::string_view relation_name(CoherenceRelation cr) {
  switch (cr) {
    case CoherenceRelation::Insertion: return "Insertion";
    case CoherenceRelation::Concretization: return "Concretization";
    case CoherenceRelation::Projection: return "Projection";
    case CoherenceRelation::Restatement: return "Restatement";
    case CoherenceRelation::Extension: return "Extension";
    case CoherenceRelation::Unparsed: return "Unparsed";
  }
  throw std::logic_error("bad relation");
}

inline std::optional<CoherenceRelation> relation_from_name(
    std::string_view name) {
  for (CoherenceRelation cr : kNamedRelations) {
    if (name == relation_name(cr)) return cr;
  }
  if (name == "Unparsed") return CoherenceRelation::Unparsed;
  return std::nullopt;
}

struct Prediction {
  Label label = Label::NonSarcastic;
  bool valid = false;  // false when recovered by fallback rules
  std::string raw;
};

namespace detail {

inline bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Whole-word occurrences of `needle` in lowercase haystack `hay`.
inline std::vector<std::size_t> word_occurrences(std::string_view hay,
                                                 std::string_view needle) {
  std::vector<std::size_t> hits;
  std::size_t from = 0;
  while (true) {
    std::size_t at = hay.find(needle, from);
    if (at == std::string_view::npos) break;
    const bool left_ok = at == 0 || !is_word_char(hay[at - 1]);
    const std::size_t end = at + needle.size();
    const bool right_ok = end >= hay.size() || !is_word_char(hay[end]);
    if (left_ok && right_ok) hits.push_back(at);
    from = at + 1;
  }
  return hits;
}

// A standalone 0/1 token: not embedded in a word, not a digit run, and not
// part of a decimal number ("0.9", "3.1").
inline bool standalone_digit_at(std::string_view s, std::size_t i) {
  if (i > 0) {
    unsigned char prev = s[i - 1];
    if (is_word_char(prev)) return false;
    if (prev == '.' && i >= 2 && std::isdigit(static_cast<unsigned char>(s[i - 2]))) {
      return false;
    }
  }
  if (i + 1 < s.size()) {
    unsigned char next = s[i + 1];
    if (is_word_char(next)) return false;
    if (next == '.' && i + 2 < s.size() &&
        std::isdigit(static_cast<unsigned char>(s[i + 2]))) {
      return false;
    }
  }
  return true;
}

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  std::size_t b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Total function: every string maps to a label. Rule order:
//   1. trimmed input is exactly "0" or "1"
//   2. exactly one standalone 0/1 token anywhere in the input
//   3. "sarcastic" wording, with negation ("not"/"non-") winning
//   4. default NonSarcastic
// Rules 3 and 4 mark the prediction invalid; the label still counts so no
// sample is ever dropped from scoring.
inline Prediction parse_binary(std::string_view raw) {
  Prediction p;
  p.raw = std::string(raw);

  std::string_view trimmed = detail::trim(raw);
  if (trimmed == "0" || trimmed == "1") {
    p.label = label_from_code(trimmed[0] - '0');
    p.valid = true;
    return p;
  }

  std::vector<char> tokens;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if ((raw[i] == '0' || raw[i] == '1') && detail::standalone_digit_at(raw, i)) {
      tokens.push_back(raw[i]);
    }
  }
  if (tokens.size() == 1) {
    p.label = label_from_code(tokens[0] - '0');
    p.valid = true;
    return p;
  }

  std::string lower = detail::to_lower(raw);
  const bool negated = lower.find("not sarcastic") != std::string::npos ||
                       lower.find("non-sarcastic") != std::string::npos;
  if (negated) {
    p.label = Label::NonSarcastic;
    return p;
  }
  if (!detail::word_occurrences(lower, "sarcastic").empty()) {
    p.label = Label::Sarcastic;
    return p;
  }

  p.label = Label::NonSarcastic;
  return p;
}

// Scans the rationale for the five relation names (case-insensitive, whole
// words). If the phrase "coherence relation" appears, the nearest name after
// its last occurrence within the same sentence wins; otherwise the last name
// mentioned anywhere wins. No name (commonly a truncated rationale) maps to
// Unparsed.
inline CoherenceRelation parse_relation(std::string_view rationale,
                                        bool truncated) {
  (void)truncated;  // truncation only matters through the absence of a name
  std::string lower = detail::to_lower(rationale);

  struct Hit {
    std::size_t pos;
    CoherenceRelation cr;
  };
  std::vector<Hit> hits;
  for (CoherenceRelation cr : kNamedRelations) {
    std::string needle = detail::to_lower(relation_name(cr));
    for (std::size_t pos : detail::word_occurrences(lower, needle)) {
      hits.push_back({pos, cr});
    }
  }
  if (hits.empty()) return CoherenceRelation::Unparsed;
  std::sort(hits.begin(), hits.end(),
            [](const Hit& a, const Hit& b) { return a.pos < b.pos; });

  auto phrase_hits = detail::word_occurrences(lower, "coherence relation");
  if (!phrase_hits.empty()) {
    const std::size_t anchor = phrase_hits.back() + std::string_view("coherence relation").size();
    const std::size_t sentence_end = lower.find_first_of(".!?\n", anchor);
    const std::size_t limit =
        sentence_end == std::string::npos ? lower.size() : sentence_end;
    for (const Hit& h : hits) {
      if (h.pos >= anchor && h.pos < limit) return h.cr;  // nearest after
    }
  }
  return hits.back().cr;  // last mention wins
}

}  // namespace ironic
