#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "emreason/datasets.hpp"
#include "emreason/gateway.hpp"
#include "emreason/prompts.hpp"

namespace em {

enum class StrategyKind { kBaseline, kCotSingle, kCotMulti, kDebate };

std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy(std::string_view text);

/// baseline: [baseline]; cot_single: [cot_single];
/// cot_multi: [step1_tokens, step2_attributes, step3_decision];
/// debate: [debate_pro, debate_con, debate_synthesis].
std::vector<StepId> step_sequence(StrategyKind kind);

struct Turn {
  StepId step;
  CompletionRequest request;
  Completion completion;
};

struct Transcript {
  std::string pair_id;
  StrategyKind strategy = StrategyKind::kBaseline;
  PromptVariant variant;
  std::vector<Turn> turns;
  Usage total_usage;
};

struct ModelSettings {
  std::string model = "gpt-5.1-mini";
  double temperature = 0.0;
  std::size_t max_output_tokens = 1024;
};

/// A gateway failure inside a strategy, tagged with the step that failed.
class StepFailed : public Error {
 public:
  StepFailed(StepId step, Errc code, const std::string& message)
      : Error(code, std::string(to_string(step)) + ": " + message), step_(step) {}

  StepId step() const { return step_; }

 private:
  StepId step_;
};

/// Runs one pair through a strategy. Turns are strictly sequential; each
/// chained prompt embeds the earlier responses verbatim. A failing turn
/// aborts the pair with StepFailed.
Transcript run_strategy(StrategyKind kind, const RecordPair& pair, const PromptVariant& variant,
                        std::span<const FewShotExample> shots, Gateway& gateway, const PromptContext& ctx,
                        const ModelSettings& model = {});

/// Audit form: one JSON object per transcript (no cache flags, so reruns
/// served from the cache serialize identically).
nlohmann::ordered_json transcript_to_json(const Transcript& transcript);
Transcript transcript_from_json(const nlohmann::json& j);

}  // namespace em
