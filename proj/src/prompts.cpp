#include "emreason/prompts.hpp"

#include <array>
#include <fstream>
#include <set>

#include "emreason/error.hpp"
#include "emreason/lexical.hpp"

namespace em {
namespace {

constexpr const char* kBuiltinTemplates =
#include "builtin_templates.inc"
    ;

constexpr std::array kAllSteps = {StepId::kStep1Tokens,     StepId::kStep2Attributes, StepId::kStep3Decision,
                                  StepId::kDebatePro,       StepId::kDebateCon,       StepId::kDebateSynthesis,
                                  StepId::kBaseline,        StepId::kCotSingle};

using Values = std::map<std::string, std::string, std::less<>>;

// Placeholders each kind of template may use.
const std::set<std::string, std::less<>> kInstructionSlots = {"items", "entity"};
const std::map<std::string, std::set<std::string, std::less<>>, std::less<>> kBlockSlots = {
    {"pair", {"left", "right"}},
    {"hints", {"tokens", "phrases"}},
    {"hints_empty", {}},
    {"examples_header", {}},
    {"example", {"index", "pair", "answer"}},
    {"prior_step1", {"text"}},
    {"prior_step2", {"text"}},
    {"pro", {"text"}},
    {"con", {"text"}},
    {"response.free", {}},
    {"response.forced", {}},
    {"answers.free.match", {}},
    {"answers.free.no_match", {}},
    {"answers.forced.match", {}},
    {"answers.forced.no_match", {}},
};

std::string instruction_key(StepId step, TaskFrame frame, Verbiage verbiage) {
  return std::string(to_string(step)) + "." + std::string(to_string(frame)) + "." + std::string(to_string(verbiage));
}

// Walks `text` and reports each placeholder name; returns false on an
// unterminated "{{".
template <typename Fn>
bool scan_placeholders(std::string_view text, Fn&& on_literal_and_slot) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      on_literal_and_slot(text.substr(pos), std::string_view{});
      return true;
    }
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) return false;
    on_literal_and_slot(text.substr(pos, open - pos), text.substr(open + 2, close - open - 2));
    pos = close + 2;
  }
  return true;
}

void check_slots(std::string_view where, std::string_view text, const std::set<std::string, std::less<>>& allowed) {
  const bool closed = scan_placeholders(text, [&](std::string_view, std::string_view slot) {
    if (!slot.empty() && !allowed.contains(slot)) {
      throw Error(Errc::kTemplateError, std::string(where) + ": unknown placeholder {{" + std::string(slot) + "}}");
    }
  });
  if (!closed) throw Error(Errc::kTemplateError, std::string(where) + ": unterminated placeholder");
}

const nlohmann::json& require(const nlohmann::json& node, std::string_view key, std::string_view where) {
  if (!node.is_object() || !node.contains(key)) {
    throw Error(Errc::kTemplateError, "template file is missing " + std::string(where) + "." + std::string(key));
  }
  return node.at(std::string(key));
}

std::string require_string(const nlohmann::json& node, std::string_view key, std::string_view where) {
  const auto& value = require(node, key, where);
  if (!value.is_string()) {
    throw Error(Errc::kTemplateError, std::string(where) + "." + std::string(key) + " must be a string");
  }
  return value.get<std::string>();
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

std::string join_sections(const std::vector<std::string>& sections) {
  std::string out;
  for (const auto& section : sections) {
    if (section.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += section;
  }
  return out;
}

class Renderer {
 public:
  Renderer(const PromptContext& ctx, const PromptVariant& variant) : ctx_(ctx), t_(*ctx.templates), variant_(variant) {}

  std::string instruction(StepId step) const {
    const auto& words = t_.domain(ctx_.domain);
    return fill_template(t_.instruction(step, variant_.task_frame, variant_.verbiage),
                         {{"items", words.items}, {"entity", words.entity}});
  }

  std::string pair(const RecordPair& pair) const {
    return fill_template(t_.block("pair"), {{"left", serialize_record(pair.left, ctx_.schema, ctx_.style)},
                                            {"right", serialize_record(pair.right, ctx_.schema, ctx_.style)}});
  }

  std::string hints(const RecordPair& pair) const {
    if (!variant_.hints) return {};
    const auto set = compute_hints(pair, ctx_.schema, ctx_.hint_min_phrase_tokens);
    const auto& none = t_.block("hints_empty");
    return fill_template(t_.block("hints"), {{"tokens", set.tokens.empty() ? none : join(set.tokens, ", ")},
                                             {"phrases", set.phrases.empty() ? none : join(set.phrases, "; ")}});
  }

  std::string examples(std::span<const FewShotExample> shots) const {
    if (shots.empty()) return {};
    std::vector<std::string> parts{t_.block("examples_header")};
    for (std::size_t i = 0; i < shots.size(); ++i) {
      parts.push_back(fill_template(t_.block("example"),
                                    {{"index", std::to_string(i + 1)},
                                     {"pair", pair(shots[i].pair)},
                                     {"answer", t_.answer(variant_.response_frame, shots[i].answer.is_match())}}));
    }
    return join_sections(parts);
  }

  std::string prior(std::string_view block, std::string_view text) const {
    return fill_template(t_.block(block), {{"text", std::string(text)}});
  }

  std::string response() const { return t_.response_instruction(variant_.response_frame); }

  MessageList wrap(std::string user) const {
    std::vector<Message> messages;
    if (!t_.system().empty()) messages.push_back({Role::kSystem, t_.system()});
    messages.push_back({Role::kUser, std::move(user)});
    return MessageList(std::move(messages));
  }

 private:
  const PromptContext& ctx_;
  const PromptTemplates& t_;
  const PromptVariant& variant_;
};

void check_shots(const PromptVariant& variant, std::span<const FewShotExample> shots) {
  if (shots.size() != variant.shots) {
    throw Error(Errc::kShotCountMismatch, "variant asks for " + std::to_string(variant.shots) + " examples, got " +
                                              std::to_string(shots.size()));
  }
}

}  // namespace

// ---- enums -----------------------------------------------------------------

std::string_view to_string(TaskFrame v) { return v == TaskFrame::kGeneral ? "general" : "domain_specific"; }
std::string_view to_string(Verbiage v) { return v == Verbiage::kSimple ? "simple" : "complex"; }
std::string_view to_string(ResponseFrame v) { return v == ResponseFrame::kFree ? "free" : "forced"; }

TaskFrame parse_task_frame(std::string_view text) {
  if (text == "general") return TaskFrame::kGeneral;
  if (text == "domain_specific" || text == "domain-specific" || text == "domain") return TaskFrame::kDomainSpecific;
  throw Error(Errc::kInvalidArgument, "unknown task frame '" + std::string(text) + "'");
}

Verbiage parse_verbiage(std::string_view text) {
  if (text == "simple") return Verbiage::kSimple;
  if (text == "complex") return Verbiage::kComplex;
  throw Error(Errc::kInvalidArgument, "unknown verbiage '" + std::string(text) + "'");
}

ResponseFrame parse_response_frame(std::string_view text) {
  if (text == "free") return ResponseFrame::kFree;
  if (text == "forced") return ResponseFrame::kForced;
  throw Error(Errc::kInvalidArgument, "unknown response frame '" + std::string(text) + "'");
}

std::string PromptVariant::name() const {
  return std::string(to_string(task_frame)) + "-" + std::string(to_string(verbiage)) + "-" +
         std::string(to_string(response_frame)) + "-" + std::to_string(shots) + "shot-" + (hints ? "hints" : "nohints");
}

nlohmann::ordered_json to_json(const PromptVariant& variant) {
  nlohmann::ordered_json j;
  j["task_frame"] = to_string(variant.task_frame);
  j["verbiage"] = to_string(variant.verbiage);
  j["response_frame"] = to_string(variant.response_frame);
  j["shots"] = variant.shots;
  j["hints"] = variant.hints ? "on" : "off";
  return j;
}

PromptVariant variant_from_json(const nlohmann::json& j) {
  PromptVariant v;
  v.task_frame = parse_task_frame(j.at("task_frame").get<std::string>());
  v.verbiage = parse_verbiage(j.at("verbiage").get<std::string>());
  v.response_frame = parse_response_frame(j.at("response_frame").get<std::string>());
  v.shots = j.at("shots").get<std::size_t>();
  const auto& hints = j.at("hints");
  v.hints = hints.is_boolean() ? hints.get<bool>() : hints.get<std::string>() == "on";
  return v;
}

std::vector<PromptVariant> enumerate_variants(std::span<const std::size_t> shot_counts) {
  if (shot_counts.empty()) throw Error(Errc::kInvalidArgument, "shot_counts must be non-empty");
  std::vector<PromptVariant> out;
  for (auto frame : {TaskFrame::kGeneral, TaskFrame::kDomainSpecific}) {
    for (auto verbiage : {Verbiage::kSimple, Verbiage::kComplex}) {
      for (auto response : {ResponseFrame::kFree, ResponseFrame::kForced}) {
        for (auto shots : shot_counts) {
          for (bool hints : {false, true}) out.push_back({frame, verbiage, response, shots, hints});
        }
      }
    }
  }
  return out;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view text) {
  if (text == "system") return Role::kSystem;
  if (text == "user") return Role::kUser;
  if (text == "assistant") return Role::kAssistant;
  throw Error(Errc::kInvalidArgument, "unknown role '" + std::string(text) + "'");
}

MessageList::MessageList(std::vector<Message> messages) : messages_(std::move(messages)) {
  if (messages_.empty()) throw Error(Errc::kInvalidArgument, "message list must be non-empty");
  std::size_t i = messages_.front().role == Role::kSystem ? 1 : 0;
  if (i == 1 && messages_.size() == 1) throw Error(Errc::kInvalidArgument, "message list holds only a system message");
  for (Role expected = Role::kUser; i < messages_.size(); ++i) {
    if (messages_[i].role != expected) {
      throw Error(Errc::kInvalidArgument, "message " + std::to_string(i) + " should have role " +
                                              std::string(to_string(expected)));
    }
    expected = expected == Role::kUser ? Role::kAssistant : Role::kUser;
  }
}

std::string MessageList::text() const {
  std::string out;
  for (const auto& m : messages_) {
    if (!out.empty()) out += "\n\n";
    out += m.content;
  }
  return out;
}

std::string_view to_string(StepId step) {
  switch (step) {
    case StepId::kStep1Tokens: return "step1_tokens";
    case StepId::kStep2Attributes: return "step2_attributes";
    case StepId::kStep3Decision: return "step3_decision";
    case StepId::kDebatePro: return "debate_pro";
    case StepId::kDebateCon: return "debate_con";
    case StepId::kDebateSynthesis: return "debate_synthesis";
    case StepId::kBaseline: return "baseline";
    case StepId::kCotSingle: return "cot_single";
  }
  return "baseline";
}

StepId parse_step_id(std::string_view text) {
  for (auto step : kAllSteps) {
    if (to_string(step) == text) return step;
  }
  throw Error(Errc::kInvalidArgument, "unknown step '" + std::string(text) + "'");
}

bool is_decision_step(StepId step) {
  return step == StepId::kBaseline || step == StepId::kCotSingle || step == StepId::kStep3Decision ||
         step == StepId::kDebateSynthesis;
}

// ---- templates -------------------------------------------------------------

std::string fill_template(std::string_view text, const Values& values) {
  std::string out;
  out.reserve(text.size());
  const bool closed = scan_placeholders(text, [&](std::string_view literal, std::string_view slot) {
    out += literal;
    if (slot.empty()) return;
    auto it = values.find(slot);
    if (it == values.end()) throw Error(Errc::kTemplateError, "no value for placeholder {{" + std::string(slot) + "}}");
    out += it->second;
  });
  if (!closed) throw Error(Errc::kTemplateError, "unterminated placeholder in template");
  return out;
}

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates instance = from_json(nlohmann::json::parse(kBuiltinTemplates));
  return instance;
}

PromptTemplates PromptTemplates::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kMissingFile, "cannot open template file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kTemplateError, path.string() + ": " + e.what());
  }
}

PromptTemplates PromptTemplates::from_json(const nlohmann::json& document) {
  PromptTemplates t;
  t.version_ = require_string(document, "version", "");
  t.system_ = document.contains("system") ? document.at("system").get<std::string>() : std::string{};

  for (const auto& [name, words] : require(document, "domains", "").items()) {
    t.domains_[name] = {require_string(words, "items", "domains." + name),
                        require_string(words, "entity", "domains." + name)};
  }
  if (!t.domains_.contains("generic")) throw Error(Errc::kTemplateError, "domains.generic is required");

  const auto& blocks = require(document, "blocks", "");
  for (const auto& [key, allowed] : kBlockSlots) {
    const nlohmann::json* node = &blocks;
    std::string path = "blocks";
    std::string_view rest = key;
    while (true) {
      const auto dot = rest.find('.');
      const auto part = rest.substr(0, dot);
      if (dot == std::string_view::npos) {
        auto text = require_string(*node, part, path);
        check_slots(path + "." + std::string(part), text, allowed);
        t.blocks_[key] = std::move(text);
        break;
      }
      node = &require(*node, part, path);
      path += "." + std::string(part);
      rest = rest.substr(dot + 1);
    }
  }

  const auto& steps = require(document, "steps", "");
  for (auto step : kAllSteps) {
    const auto step_name = std::string(to_string(step));
    const auto& step_node = require(steps, step_name, "steps");
    for (auto frame : {TaskFrame::kGeneral, TaskFrame::kDomainSpecific}) {
      const auto frame_name = std::string(to_string(frame));
      const auto& frame_node = require(step_node, frame_name, "steps." + step_name);
      for (auto verbiage : {Verbiage::kSimple, Verbiage::kComplex}) {
        const auto where = "steps." + step_name + "." + frame_name;
        auto text = require_string(frame_node, to_string(verbiage), where);
        check_slots(where + "." + std::string(to_string(verbiage)), text, kInstructionSlots);
        t.instructions_[instruction_key(step, frame, verbiage)] = std::move(text);
      }
    }
  }
  return t;
}

const std::string& PromptTemplates::instruction(StepId step, TaskFrame frame, Verbiage verbiage) const {
  return instructions_.at(instruction_key(step, frame, verbiage));
}

const std::string& PromptTemplates::block(std::string_view name) const {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw Error(Errc::kTemplateError, "no template block '" + std::string(name) + "'");
  return it->second;
}

const std::string& PromptTemplates::response_instruction(ResponseFrame frame) const {
  return block(frame == ResponseFrame::kForced ? "response.forced" : "response.free");
}

const std::string& PromptTemplates::answer(ResponseFrame frame, bool match) const {
  const std::string key = std::string("answers.") + std::string(to_string(frame)) + (match ? ".match" : ".no_match");
  return block(key);
}

const PromptTemplates::DomainWords& PromptTemplates::domain(std::string_view name) const {
  auto it = domains_.find(name);
  return it == domains_.end() ? domains_.find("generic")->second : it->second;
}

// ---- rendering -------------------------------------------------------------

HintSet compute_hints(const RecordPair& pair, const AttributeSchema& schema, std::size_t min_phrase_tokens) {
  const auto left = value_tokens(pair.left, schema);
  const auto right = value_tokens(pair.right, schema);
  const auto diff = token_diff(left, right);
  HintSet hints;
  std::set<std::string, std::less<>> seen;
  for (const auto& token : left) {
    if (diff.matched.contains(token) && seen.insert(token).second) hints.tokens.push_back(token);
  }
  hints.phrases = common_phrases(left, right, min_phrase_tokens);
  return hints;
}

MessageList render_baseline(const PromptContext& ctx, const RecordPair& pair, const PromptVariant& variant,
                            std::span<const FewShotExample> shots) {
  check_shots(variant, shots);
  Renderer r(ctx, variant);
  return r.wrap(join_sections(
      {r.instruction(StepId::kBaseline), r.examples(shots), r.pair(pair), r.hints(pair), r.response()}));
}

MessageList render_step(const PromptContext& ctx, StepId step, const RecordPair& pair,
                        std::span<const PriorResponse> prior, const PromptVariant& variant,
                        std::span<const FewShotExample> shots) {
  check_shots(variant, shots);
  static constexpr StepId kChain[] = {StepId::kStep1Tokens, StepId::kStep2Attributes, StepId::kStep3Decision};
  std::size_t position = 0;
  while (position < 3 && kChain[position] != step) ++position;
  if (position == 3) {
    throw Error(Errc::kInvalidArgument, std::string(to_string(step)) + " is not a three-step chain step");
  }
  if (prior.size() < position) {
    throw Error(Errc::kMissingPrior, std::string(to_string(step)) + " needs " + std::to_string(position) +
                                         " prior response(s), got " + std::to_string(prior.size()));
  }
  if (prior.size() > position) {
    throw Error(Errc::kWrongPriorOrder, std::string(to_string(step)) + " takes " + std::to_string(position) +
                                            " prior response(s), got " + std::to_string(prior.size()));
  }
  for (std::size_t i = 0; i < position; ++i) {
    if (prior[i].step != kChain[i]) {
      throw Error(Errc::kWrongPriorOrder, "prior response " + std::to_string(i) + " is " +
                                              std::string(to_string(prior[i].step)) + ", expected " +
                                              std::string(to_string(kChain[i])));
    }
  }

  Renderer r(ctx, variant);
  switch (step) {
    case StepId::kStep1Tokens:
      return r.wrap(join_sections({r.instruction(step), r.pair(pair), r.hints(pair)}));
    case StepId::kStep2Attributes:
      return r.wrap(join_sections(
          {r.instruction(step), r.pair(pair), r.hints(pair), r.prior("prior_step1", prior[0].text)}));
    default:
      return r.wrap(join_sections({r.instruction(step), r.examples(shots), r.pair(pair), r.hints(pair),
                                   r.prior("prior_step1", prior[0].text), r.prior("prior_step2", prior[1].text),
                                   r.response()}));
  }
}

MessageList render_single_prompt_cot(const PromptContext& ctx, const RecordPair& pair, const PromptVariant& variant,
                                     std::span<const FewShotExample> shots) {
  check_shots(variant, shots);
  Renderer r(ctx, variant);
  return r.wrap(join_sections(
      {r.instruction(StepId::kCotSingle), r.examples(shots), r.pair(pair), r.hints(pair), r.response()}));
}

MessageList render_debate(const PromptContext& ctx, StepId phase, const RecordPair& pair,
                          std::optional<std::string_view> pro, std::optional<std::string_view> con,
                          const PromptVariant& variant, std::span<const FewShotExample> shots) {
  Renderer r(ctx, variant);
  switch (phase) {
    case StepId::kDebatePro:
    case StepId::kDebateCon:
      return r.wrap(join_sections({r.instruction(phase), r.pair(pair), r.hints(pair)}));
    case StepId::kDebateSynthesis:
      if (!pro || !con) {
        throw Error(Errc::kMissingArguments, std::string("synthesis needs both arguments; missing ") +
                                                 (!pro && !con ? "pro and con" : (!pro ? "pro" : "con")));
      }
      check_shots(variant, shots);
      return r.wrap(join_sections({r.instruction(phase), r.examples(shots), r.pair(pair), r.hints(pair),
                                   r.prior("pro", *pro), r.prior("con", *con), r.response()}));
    default:
      throw Error(Errc::kInvalidArgument, std::string(to_string(phase)) + " is not a debate phase");
  }
}

}  // namespace em
