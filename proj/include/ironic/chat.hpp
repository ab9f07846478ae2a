#pragma once

#include "ironic/corpus.hpp"
#include "ironic/encoding.hpp"

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ironic {

enum class Role { System, User, Assistant };

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  throw std::logic_error("bad role");
}

struct ContentPart {
  enum class Kind { Text, Image };
  Kind kind = Kind::Text;
  std::string text;
  std::shared_ptr<const ImagePayload> image;

  static ContentPart make_text(std::string t) {
    ContentPart p;
    p.kind = Kind::Text;
    p.text = std::move(t);
    return p;
  }
  static ContentPart make_image(std::shared_ptr<const ImagePayload> img) {
    if (!img) throw std::invalid_argument("image part without payload");
    ContentPart p;
    p.kind = Kind::Image;
    p.image = std::move(img);
    return p;
  }
};

struct Message {
  Role role = Role::User;
  std::vector<ContentPart> parts;
};

class ChatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered transcript. Append paths enforce the shape every strategy relies
// on: at most one System message and only at position 0, then strictly
// alternating User/Assistant. System messages are text-only.
class Conversation {
 public:
  const std::vector<Message>& messages() const { return messages_; }
  bool empty() const { return messages_.empty(); }
  std::size_t size() const { return messages_.size(); }

  void append_system(std::string text) {
    if (!messages_.empty()) {
      throw ChatError("system message must be the first message");
    }
    Message m;
    m.role = Role::System;
    m.parts.push_back(ContentPart::make_text(std::move(text)));
    messages_.push_back(std::move(m));
  }

  void append_user(std::vector<ContentPart> parts) {
    if (parts.empty()) throw ChatError("message needs at least one part");
    Role last = last_non_system_role();
    if (last == Role::User) {
      throw ChatError("user message cannot follow a user message");
    }
    Message m;
    m.role = Role::User;
    m.parts = std::move(parts);
    messages_.push_back(std::move(m));
  }

  void append_assistant(std::string text) {
    if (!ends_in_user()) {
      throw ChatError("assistant message must answer a user message");
    }
    Message m;
    m.role = Role::Assistant;
    m.parts.push_back(ContentPart::make_text(std::move(text)));
    messages_.push_back(std::move(m));
  }

  bool ends_in_user() const {
    return !messages_.empty() && messages_.back().role == Role::User;
  }
  bool ends_in_assistant() const {
    return !messages_.empty() && messages_.back().role == Role::Assistant;
  }

 private:
  Role last_non_system_role() const {
    for (auto it = messages_.rbegin(); it != messages_.rend(); ++it) {
      if (it->role != Role::System) return it->role;
    }
    return Role::System;  // none yet
  }

  std::vector<Message> messages_;
};

enum class TemplateId {
  BaselineSystem,
  IronicSystem,
  ZeroShotUser,
  CotUser1,
  CotUser2,
  IronicUser1,
  IronicUser2,
  S3User1,
  S3User2,
};

inline constexpr std::array<TemplateId, 9> kAllTemplates = {
    TemplateId::BaselineSystem, TemplateId::IronicSystem,
    TemplateId::ZeroShotUser,   TemplateId::CotUser1,
    TemplateId::CotUser2,       TemplateId::IronicUser1,
    TemplateId::IronicUser2,    TemplateId::S3User1,
    TemplateId::S3User2,
};

inline std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::BaselineSystem: return "baseline_system";
    case TemplateId::IronicSystem: return "ironic_system";
    case TemplateId::ZeroShotUser: return "zero_shot_user";
    case TemplateId::CotUser1: return "cot_user_1";
    case TemplateId::CotUser2: return "cot_user_2";
    case TemplateId::IronicUser1: return "ironic_user_1";
    case TemplateId::IronicUser2: return "ironic_user_2";
    case TemplateId::S3User1: return "s3_user_1";
    case TemplateId::S3User2: return "s3_user_2";
  }
  throw std::logic_error("bad template id");
}

inline constexpr std::string_view kPairPlaceholder = "{image-text-pair}";

// Template bodies. These mirror the plain-text assets in assets/templates/
// byte for byte; a unit test pins both against the committed digest list.
inline std::string_view template_body(TemplateId id) {
  switch (id) {
    case TemplateId::BaselineSystem:
      return "You are an expert linguist. Your task is to analyze a "
             "image-text pair and determine if it is 'sarcastic' or "
             "'non-sarcastic'.";
    case TemplateId::IronicSystem:
      return R"tpl(You are an expert linguist, and your task is to analyze and predict the most applicable Coherence Relations for image-text pairs. A coherence relation describes the structural, logical, and purposeful relationships between an image and its caption, capturing the author's intent.

These are the possible coherence relations you can assign to an image-text pair:

- Insertion: The salient object described in the image is not explicitly mentioned in the text.
- Concretization: Both the text and image contain a mention of the main visual entity.
- Projection: The main entity mentioned in the text is implicitly related to the visual objects present in the image.
- Restatement: The text directly describes the image contents.
- Extension: The image expands upon the story or idea in the text, presenting new elements or elaborations, effectively filling in narrative gaps left by the text.)tpl";
    case TemplateId::ZeroShotUser:
      return R"tpl(Output 0 if it does not contain sarcastic content, and 1 if it does. Do not add anything else in your response.

{image-text-pair})tpl";
    case TemplateId::CotUser1:
      return R"tpl(Let's think step-by-step and analyze the relationship between the text and image carefully.

{image-text-pair})tpl";
    case TemplateId::CotUser2:
      return "Using your rationale, please determine if the image-text pair "
             "is sarcastic in nature. Output 0 if it does not contain "
             "sarcastic content, and 1 if it does. Do not add anything else "
             "in your response.";
    case TemplateId::IronicUser1:
      return R"tpl(Let's think step-by-step and analyze the relationship between the text and image carefully. Please also identify the most appropriate coherence relation between the text and image.

{image-text-pair})tpl";
    case TemplateId::IronicUser2:
      return R"tpl(Using the coherence relation analysis and the input image-text pair, please determine if the content contains multi-modal sarcasm. Content where both image and text together create a sarcastic effect is considered multi-modal sarcasm, do not focus on the sarcasm in only the image or text. Clearly distinguish simple humor and satire which is not sarcastic from mockery and irony which is sarcastic.

Output 0 if it does not contain multi-modal sarcasm, and 1 if it does. Do not add anything else in your response.)tpl";
    case TemplateId::S3User1:
      return R"tpl(Given the following image and text, please judge whether there is sarcasm based on the 3 perspectives below.

1. Superficial Expression: This includes detect underlying critiques in contexts through image-text discrepancies.
2. Semantic Information: This includes detect extreme portrayals and metaphorical in contexts through image-text semantic.
3. Sentiment Expression: This includes detect criticize emotion on specific subjects or behaviors in the content.

Without considering conclusions drawn solely from images or text, both must be considered together. Then, you should output the corresponding chain-of-thought to support your answer.

{image-text-pair})tpl";
    case TemplateId::S3User2:
      return R"tpl(Unmask the hidden intent!  Given the above rationales, delve into its layers of meaning.  Analyze the surface - the literal words used.  Pierce deeper to uncover the semantic information - the intended meaning behind those words.  Finally, gauge the sentiment - the emotional undercurrent.  By weaving these insights together, can you crack the code of sarcasm and determine if the comment is meant to be sincere or laced with sarcastic?

Follow these rules:
1. If any perspective cannot determine sarcasm due to lack of information, disregard that perspective.
2. If any of the views conflict, choose the view with the most well-founded reasoning.
3. Output 0 if it does not contain sarcastic content, and 1 if it does. Do not add anything else in your response.)tpl";
  }
  throw std::logic_error("bad template id");
}

inline std::string template_digest(TemplateId id) {
  return sha256_hex(template_body(id));
}

inline bool is_system_template(TemplateId id) {
  return id == TemplateId::BaselineSystem || id == TemplateId::IronicSystem;
}

inline bool is_opener_template(TemplateId id) {
  return id == TemplateId::ZeroShotUser || id == TemplateId::CotUser1 ||
         id == TemplateId::IronicUser1 || id == TemplateId::S3User1;
}

inline bool is_continuation_template(TemplateId id) {
  return id == TemplateId::CotUser2 || id == TemplateId::IronicUser2 ||
         id == TemplateId::S3User2;
}

// System message paired with each opener. The S3 figure shows no system
// message, so S3 openers run bare.
inline std::optional<TemplateId> system_template_for(TemplateId opener) {
  switch (opener) {
    case TemplateId::ZeroShotUser:
    case TemplateId::CotUser1:
      return TemplateId::BaselineSystem;
    case TemplateId::IronicUser1:
      return TemplateId::IronicSystem;
    case TemplateId::S3User1:
      return std::nullopt;
    default:
      throw ChatError("not an opener template");
  }
}

// The {image-text-pair} expansion: image first, then the caption prefixed
// with "Text: ", both verbatim (no trimming).
inline std::vector<ContentPart> render_pair_block(
    const Sample& sample, std::shared_ptr<const ImagePayload> image) {
  std::vector<ContentPart> parts;
  parts.push_back(ContentPart::make_image(std::move(image)));
  parts.push_back(ContentPart::make_text("Text: " + sample.text));
  return parts;
}

namespace detail {
inline std::vector<ContentPart> expand_placeholder(
    std::string_view body, const Sample& sample,
    std::shared_ptr<const ImagePayload> image) {
  const std::size_t at = body.find(kPairPlaceholder);
  if (at == std::string_view::npos) {
    throw ChatError("template has no {image-text-pair} placeholder");
  }
  std::vector<ContentPart> parts;
  if (at > 0) parts.push_back(ContentPart::make_text(std::string(body.substr(0, at))));
  for (auto& p : render_pair_block(sample, std::move(image))) {
    parts.push_back(std::move(p));
  }
  std::string_view rest = body.substr(at + kPairPlaceholder.size());
  if (!rest.empty()) parts.push_back(ContentPart::make_text(std::string(rest)));
  return parts;
}
}  // namespace detail

// Continuation turns carry no image and no placeholder; the whole template
// body becomes one text part appended to the prior transcript.
inline Conversation append_continuation_turn(Conversation prior,
                                             TemplateId id) {
  if (!is_continuation_template(id)) {
    throw ChatError(std::string(template_name(id)) +
                    " is not a continuation template");
  }
  if (!prior.ends_in_assistant()) {
    throw ChatError("continuation turn requires a prior assistant message");
  }
  std::vector<ContentPart> parts;
  parts.push_back(ContentPart::make_text(std::string(template_body(id))));
  prior.append_user(std::move(parts));
  return prior;
}

inline Conversation build_turn(TemplateId id, const Sample& sample,
                               std::shared_ptr<const ImagePayload> image,
                               const Conversation& prior = {}) {
  if (is_system_template(id)) {
    throw ChatError(std::string(template_name(id)) +
                    " is not a user-turn template");
  }
  if (is_continuation_template(id)) return append_continuation_turn(prior, id);
  if (!prior.empty()) {
    throw ChatError(std::string(template_name(id)) +
                    " opens a conversation; prior transcript must be empty");
  }
  Conversation conv;
  if (auto sys = system_template_for(id)) {
    conv.append_system(std::string(template_body(*sys)));
  }
  conv.append_user(detail::expand_placeholder(template_body(id), sample,
                                              std::move(image)));
  return conv;
}

// Stable plain-text rendering used for golden transcripts and debugging.
// Image bytes are elided down to mime + digest.
inline std::string render_conversation(const Conversation& conv) {
  std::string out;
  for (const Message& m : conv.messages()) {
    out += "<<<";
    out += role_name(m.role);
    out += ">>>\n";
    for (const ContentPart& p : m.parts) {
      if (p.kind == ContentPart::Kind::Text) {
        out += p.text;
        out += "\n";
      } else {
        out += "[image ";
        out += p.image->mime;
        out += " sha256:";
        out += sha256_hex(std::span<const unsigned char>(p.image->bytes));
        out += "]\n";
      }
    }
  }
  return out;
}

}  // namespace ironic
