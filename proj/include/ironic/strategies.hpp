#pragma once

#include "ironic/chat.hpp"
#include "ironic/corpus.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ironic {

enum class StrategyId { ZeroShot, ZeroShotCot, S3Cot, Ironic };

inline constexpr std::array<StrategyId, 4> kAllStrategies = {
    StrategyId::ZeroShot, StrategyId::ZeroShotCot, StrategyId::S3Cot,
    StrategyId::Ironic};

inline int turn_count(StrategyId s) {
  return s == StrategyId::ZeroShot ? 1 : 2;
}

// Config/file token.
inline std::string_view strategy_name(StrategyId s) {
  switch (s) {
    case StrategyId::ZeroShot: return "zero-shot";
    case StrategyId::ZeroShotCot: return "zero-shot-cot";
    case StrategyId::S3Cot: return "s3-cot";
    case StrategyId::Ironic: return "ironic";
  }
  throw std::logic_error("bad strategy");
}

// Report "Type" column.
inline std::string_view strategy_display_name(StrategyId s) {
  switch (s) {
    case StrategyId::ZeroShot: return "Zero-Shot";
    case StrategyId::ZeroShotCot: return "Zero-Shot CoT";
    case StrategyId::S3Cot: return "S3 CoT";
    case StrategyId::Ironic: return "IRONIC";
  }
  throw std::logic_error("bad strategy");
}

inline StrategyId strategy_from_name(std::string_view name) {
  std::string norm(name);
  for (auto& c : norm) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_') c = '-';
  }
  for (StrategyId s : kAllStrategies) {
    if (norm == strategy_name(s)) return s;
  }
  throw std::invalid_argument("unknown strategy \"" + std::string(name) +
                              "\"");
}

inline TemplateId opener_template(StrategyId s) {
  switch (s) {
    case StrategyId::ZeroShot: return TemplateId::ZeroShotUser;
    case StrategyId::ZeroShotCot: return TemplateId::CotUser1;
    case StrategyId::S3Cot: return TemplateId::S3User1;
    case StrategyId::Ironic: return TemplateId::IronicUser1;
  }
  throw std::logic_error("bad strategy");
}

inline std::optional<TemplateId> continuation_template(StrategyId s) {
  switch (s) {
    case StrategyId::ZeroShot: return std::nullopt;
    case StrategyId::ZeroShotCot: return TemplateId::CotUser2;
    case StrategyId::S3Cot: return TemplateId::S3User2;
    case StrategyId::Ironic: return TemplateId::IronicUser2;
  }
  throw std::logic_error("bad strategy");
}

class StrategyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-sample state machine. The transcript always holds exactly the
// conversation the next completion request should send; ingesting a response
// advances it (turn-1 output is echoed back verbatim as an assistant
// message, truncated or not).
struct StrategyState {
  StrategyId strategy = StrategyId::ZeroShot;
  std::string sample_id;
  int turn_index = 0;
  Conversation transcript;
  std::optional<std::string> rationale;
  bool rationale_truncated = false;
  std::optional<std::string> final_raw;
  bool final_truncated = false;
  bool done = false;
};

inline StrategyState make_state(StrategyId strategy, const Sample& sample,
                                std::shared_ptr<const ImagePayload> image) {
  StrategyState st;
  st.strategy = strategy;
  st.sample_id = sample.id;
  st.transcript = build_turn(opener_template(strategy), sample, std::move(image));
  return st;
}

// Pure: returns the conversation for the current turn without advancing.
inline const Conversation& next_request(const StrategyState& state) {
  if (state.done) throw StrategyError("strategy already done");
  if (state.turn_index >= turn_count(state.strategy)) {
    throw StrategyError("no turn " + std::to_string(state.turn_index) +
                        " in a " + std::to_string(turn_count(state.strategy)) +
                        "-turn strategy");
  }
  return state.transcript;
}

inline StrategyState ingest_response(StrategyState state, std::string raw,
                                     bool truncated) {
  if (state.done) throw StrategyError("strategy already done");
  const int turns = turn_count(state.strategy);
  if (state.turn_index == turns - 1) {
    state.final_raw = std::move(raw);
    state.final_truncated = truncated;
    state.turn_index = turns;
    state.done = true;
    return state;
  }
  state.rationale = raw;
  state.rationale_truncated = truncated;
  state.transcript.append_assistant(std::move(raw));
  state.transcript =
      append_continuation_turn(std::move(state.transcript),
                               *continuation_template(state.strategy));
  state.turn_index = 1;
  return state;
}

}  // namespace ironic
