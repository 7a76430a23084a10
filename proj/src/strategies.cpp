#include "emreason/strategies.hpp"

#include <memory>
#include <optional>

namespace em {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kBaseline: return "baseline";
    case StrategyKind::kCotSingle: return "cot_single";
    case StrategyKind::kCotMulti: return "cot_multi";
    case StrategyKind::kDebate: return "debate";
  }
  return "baseline";
}

StrategyKind parse_strategy(std::string_view text) {
  if (text == "baseline") return StrategyKind::kBaseline;
  if (text == "cot_single" || text == "single-prompt") return StrategyKind::kCotSingle;
  if (text == "cot_multi" || text == "multi-prompt") return StrategyKind::kCotMulti;
  if (text == "debate") return StrategyKind::kDebate;
  throw Error(Errc::kInvalidArgument, "unknown strategy '" + std::string(text) + "'");
}

std::vector<StepId> step_sequence(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kBaseline: return {StepId::kBaseline};
    case StrategyKind::kCotSingle: return {StepId::kCotSingle};
    case StrategyKind::kCotMulti: return {StepId::kStep1Tokens, StepId::kStep2Attributes, StepId::kStep3Decision};
    case StrategyKind::kDebate: return {StepId::kDebatePro, StepId::kDebateCon, StepId::kDebateSynthesis};
  }
  return {};
}

Transcript run_strategy(StrategyKind kind, const RecordPair& pair, const PromptVariant& variant,
                        std::span<const FewShotExample> shots, Gateway& gateway, const PromptContext& ctx,
                        const ModelSettings& model) {
  Transcript transcript;
  transcript.pair_id = pair.pair_id;
  transcript.strategy = kind;
  transcript.variant = variant;

  const auto subject = std::make_shared<const RequestSubject>(RequestSubject{pair, ctx.schema, variant});

  const auto send = [&](StepId step, MessageList messages) -> const std::string& {
    CompletionRequest request{model.model, std::move(messages), model.temperature, model.max_output_tokens, step,
                              subject};
    Completion completion;
    try {
      completion = gateway.complete(request);
    } catch (const Error& e) {
      throw StepFailed(step, e.code(), e.what());
    } catch (const std::exception& e) {
      throw StepFailed(step, Errc::kBackendUnavailable, e.what());
    }
    transcript.total_usage += completion.usage;
    transcript.turns.push_back({step, std::move(request), std::move(completion)});
    return transcript.turns.back().completion.text;
  };

  switch (kind) {
    case StrategyKind::kBaseline:
      send(StepId::kBaseline, render_baseline(ctx, pair, variant, shots));
      break;
    case StrategyKind::kCotSingle:
      send(StepId::kCotSingle, render_single_prompt_cot(ctx, pair, variant, shots));
      break;
    case StrategyKind::kCotMulti: {
      std::vector<PriorResponse> prior;
      for (auto step : step_sequence(kind)) {
        const auto& text = send(step, render_step(ctx, step, pair, prior, variant, shots));
        prior.push_back({step, text});
      }
      break;
    }
    case StrategyKind::kDebate: {
      const std::string pro = send(StepId::kDebatePro, render_debate(ctx, StepId::kDebatePro, pair, std::nullopt,
                                                                     std::nullopt, variant));
      const std::string con = send(StepId::kDebateCon, render_debate(ctx, StepId::kDebateCon, pair, std::nullopt,
                                                                     std::nullopt, variant));
      send(StepId::kDebateSynthesis, render_debate(ctx, StepId::kDebateSynthesis, pair, pro, con, variant, shots));
      break;
    }
  }
  return transcript;
}

nlohmann::ordered_json transcript_to_json(const Transcript& transcript) {
  nlohmann::ordered_json j;
  j["pair_id"] = transcript.pair_id;
  j["strategy"] = to_string(transcript.strategy);
  j["variant"] = to_json(transcript.variant);
  auto turns = nlohmann::ordered_json::array();
  for (const auto& turn : transcript.turns) {
    nlohmann::ordered_json t;
    t["step"] = to_string(turn.step);
    t["key"] = cache_key(turn.request);
    t["request"] = request_to_json(turn.request);
    t["completion"] = {{"text", turn.completion.text},
                       {"usage", usage_to_json(turn.completion.usage)},
                       {"backend", turn.completion.backend}};
    turns.push_back(std::move(t));
  }
  j["turns"] = std::move(turns);
  j["total_usage"] = usage_to_json(transcript.total_usage);
  return j;
}

Transcript transcript_from_json(const nlohmann::json& j) {
  Transcript transcript;
  transcript.pair_id = j.at("pair_id").get<std::string>();
  transcript.strategy = parse_strategy(j.at("strategy").get<std::string>());
  transcript.variant = variant_from_json(j.at("variant"));
  for (const auto& t : j.at("turns")) {
    Turn turn;
    turn.step = parse_step_id(t.at("step").get<std::string>());
    const auto& r = t.at("request");
    std::vector<Message> messages;
    for (const auto& m : r.at("messages")) {
      messages.push_back({parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    }
    turn.request = CompletionRequest{r.at("model").get<std::string>(), MessageList(std::move(messages)),
                                     r.at("temperature").get<double>(), r.at("max_output_tokens").get<std::size_t>(),
                                     turn.step, nullptr};
    const auto& c = t.at("completion");
    turn.completion.text = c.at("text").get<std::string>();
    turn.completion.usage = usage_from_json(c.at("usage"));
    turn.completion.backend = c.value("backend", "");
    transcript.turns.push_back(std::move(turn));
  }
  transcript.total_usage = usage_from_json(j.at("total_usage"));
  return transcript;
}

}  // namespace em
