#include "buddy/eval/judge.hpp"

#include "buddy/conversation/message.hpp"

namespace buddy {

std::string build_judge_prompt(const CriterionCase& c, std::string_view candidate_reply) {
  std::string p;
  p += "You are grading one reply of an English conversation tutor for young learners.\n";
  p += "Criterion: " + c.id + "\n";
  p += "Expected behaviour: " + c.expectation + "\n";
  p += "Conversation so far:\n" + c.setup_prompt + "\n";
  p += "Tutor reply:\n";
  p.append(candidate_reply);
  p += "\n";
  p += "Score how well the reply meets the expected behaviour, considering relevance and coherence, ";
  p += "from 1 (fails) to 5 (fully meets). ";
  p += "Answer with JSON only: {\"score\": <number from 1 to 5>, \"rationale\": \"<one sentence>\"}\n";
  return p;
}

std::optional<JudgeVerdict> parse_judge_verdict(std::string_view raw) {
  const auto span = find_json_object(raw);
  if (!span) return std::nullopt;
  const auto slice = raw.substr(span->first, span->second - span->first);
  const auto obj = nlohmann::json::parse(slice.begin(), slice.end(), nullptr, false);
  auto it = obj.find("score");
  if (it == obj.end() || !it->is_number()) return std::nullopt;
  const double score = it->get<double>();
  if (!(score >= 1.0 && score <= 5.0)) return std::nullopt;
  JudgeVerdict v;
  v.score = score;
  if (auto r = obj.find("rationale"); r != obj.end() && r->is_string()) v.rationale = r->get<std::string>();
  return v;
}

}  // namespace buddy
