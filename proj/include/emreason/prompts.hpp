#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "emreason/datasets.hpp"
#include "emreason/records.hpp"

namespace em {

enum class TaskFrame { kGeneral, kDomainSpecific };
enum class Verbiage { kSimple, kComplex };
enum class ResponseFrame { kFree, kForced };

std::string_view to_string(TaskFrame v);
std::string_view to_string(Verbiage v);
std::string_view to_string(ResponseFrame v);
TaskFrame parse_task_frame(std::string_view text);
Verbiage parse_verbiage(std::string_view text);
ResponseFrame parse_response_frame(std::string_view text);

/// One point of the prompt design space.
struct PromptVariant {
  TaskFrame task_frame = TaskFrame::kGeneral;
  Verbiage verbiage = Verbiage::kSimple;
  ResponseFrame response_frame = ResponseFrame::kForced;
  std::size_t shots = 0;
  bool hints = false;

  /// Stable name such as "general-simple-forced-0shot-nohints".
  std::string name() const;

  friend auto operator<=>(const PromptVariant&, const PromptVariant&) = default;
};

nlohmann::ordered_json to_json(const PromptVariant& variant);
PromptVariant variant_from_json(const nlohmann::json& j);

/// Cartesian product task_frame x verbiage x response_frame x shots x hints,
/// with task_frame varying slowest.
std::vector<PromptVariant> enumerate_variants(std::span<const std::size_t> shot_counts);

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct Message {
  Role role;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Non-empty message sequence. After an optional leading system message the
/// roles alternate user / assistant, starting with user.
class MessageList {
 public:
  MessageList() = default;
  explicit MessageList(std::vector<Message> messages);

  const std::vector<Message>& messages() const { return messages_; }
  std::size_t size() const { return messages_.size(); }
  bool empty() const { return messages_.empty(); }
  const Message& back() const { return messages_.back(); }

  /// All message contents joined by blank lines.
  std::string text() const;

  friend bool operator==(const MessageList&, const MessageList&) = default;

 private:
  std::vector<Message> messages_;
};

enum class StepId {
  kStep1Tokens,
  kStep2Attributes,
  kStep3Decision,
  kDebatePro,
  kDebateCon,
  kDebateSynthesis,
  kBaseline,
  kCotSingle,
};

std::string_view to_string(StepId step);
StepId parse_step_id(std::string_view text);

/// Steps whose prompt asks for the final match decision.
bool is_decision_step(StepId step);

/// Prompt wording, loaded from a versioned JSON template file.
class PromptTemplates {
 public:
  /// The template file shipped with the library.
  static const PromptTemplates& builtin();
  static PromptTemplates from_file(const std::filesystem::path& path);
  /// Throws Error(kTemplateError) when a required entry is missing or a
  /// template names an unknown placeholder.
  static PromptTemplates from_json(const nlohmann::json& document);

  const std::string& version() const { return version_; }
  const std::string& system() const { return system_; }
  const std::string& instruction(StepId step, TaskFrame frame, Verbiage verbiage) const;
  const std::string& block(std::string_view name) const;
  const std::string& response_instruction(ResponseFrame frame) const;
  const std::string& answer(ResponseFrame frame, bool match) const;

  struct DomainWords {
    std::string items;
    std::string entity;
  };
  const DomainWords& domain(std::string_view name) const;

 private:
  std::string version_;
  std::string system_;
  std::map<std::string, DomainWords, std::less<>> domains_;
  std::map<std::string, std::string, std::less<>> blocks_;
  std::map<std::string, std::string, std::less<>> instructions_;
};

/// Replaces each `{{name}}` with its value in a single left-to-right pass;
/// substituted text is never rescanned. Unknown names raise kTemplateError.
std::string fill_template(std::string_view text, const std::map<std::string, std::string, std::less<>>& values);

/// Everything a renderer needs besides the pair itself.
struct PromptContext {
  const PromptTemplates* templates = &PromptTemplates::builtin();
  AttributeSchema schema;
  std::string domain = "generic";
  SerializationStyle style = SerializationStyle::kLabeledLines;
  std::size_t hint_min_phrase_tokens = 2;
};

struct HintSet {
  std::vector<std::string> tokens;   // distinct matched tokens, left-side order
  std::vector<std::string> phrases;  // common phrases, longest first
};

HintSet compute_hints(const RecordPair& pair, const AttributeSchema& schema, std::size_t min_phrase_tokens = 2);

struct PriorResponse {
  StepId step;
  std::string text;
};

MessageList render_baseline(const PromptContext& ctx, const RecordPair& pair, const PromptVariant& variant,
                            std::span<const FewShotExample> shots);

/// Renders one step of the chained three-step framework. `prior` must hold
/// exactly the responses of the earlier steps, in order (kMissingPrior when
/// short, kWrongPriorOrder otherwise). Examples appear only in the step-3
/// prompt, but `shots` must always match `variant.shots`.
MessageList render_step(const PromptContext& ctx, StepId step, const RecordPair& pair,
                        std::span<const PriorResponse> prior, const PromptVariant& variant,
                        std::span<const FewShotExample> shots);

MessageList render_single_prompt_cot(const PromptContext& ctx, const RecordPair& pair, const PromptVariant& variant,
                                     std::span<const FewShotExample> shots);

/// Pro and con phases take neither argument; synthesis needs both
/// (kMissingArguments). Examples appear only in the synthesis prompt.
MessageList render_debate(const PromptContext& ctx, StepId phase, const RecordPair& pair,
                          std::optional<std::string_view> pro, std::optional<std::string_view> con,
                          const PromptVariant& variant, std::span<const FewShotExample> shots = {});

}  // namespace em
