#pragma once

// Versioned prompt assets. These are configuration shipped as constants; the
// run config can override each with a file. None of the judge-visible texts
// may contain the arm words used in stored records ("original"/"sanitized") —
// the blinding audit scans for them verbatim, so the game is described to the
// judge in Prompt A / Prompt B vocabulary (A = confidential, B = cleaned).

#include <string>

namespace leakprobe::prompts {

extern const char* const kJudgeSystemV1;
extern const char* const kAnalysisSystemV1;
extern const char* const kHardeningSuffixStandardV1;
extern const char* const kGuardInstructionV1;
extern const char* const kJudgeCorrectiveV1;
extern const char* const kGuardReaskV1;

std::string render_judge_system(const std::string& task_description,
                                const std::string& prompt_a, const std::string& prompt_b,
                                const std::string& plan_text, int question_budget,
                                const std::string& tmpl = kJudgeSystemV1);

std::string render_analysis_user(const std::string& task_description,
                                 const std::string& prompt_a, const std::string& prompt_b,
                                 const std::string& diff_text);

std::string render_guard_user(const std::string& system_prompt, const std::string& candidate);

}  // namespace leakprobe::prompts
