#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "buddy/eval/cases.hpp"

namespace buddy {

struct JudgeVerdict {
  double score = 0.0;  // [1, 5]
  std::string rationale;
};

/// The single judging prompt: case expectation, setup transcript and the
/// candidate reply, asking for `{"score": <1-5>, "rationale": "..."}`.
/// See docs/eval.md.
std::string build_judge_prompt(const CriterionCase& c, std::string_view candidate_reply);

/// First JSON object with a numeric "score" in [1, 5]; nullopt otherwise.
std::optional<JudgeVerdict> parse_judge_verdict(std::string_view raw);

}  // namespace buddy
