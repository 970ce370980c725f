#pragma once

#include <string>
#include <vector>

#include "dscore/backend.hpp"
#include "dscore/common.hpp"
#include "dscore/types.hpp"

namespace dscore {

// Prompt templates are embedded and versioned; the version string travels in
// run manifests so datasets can be traced to the wording that produced them.
inline constexpr const char* kPromptTemplateVersion = "v1";

// Segment text is always fenced with these markers. Parsers and the
// generative mock rely on them, so they are part of the template contract.
inline constexpr const char* kTextOpen = "<<<TEXT\n";
inline constexpr const char* kTextClose = "\nTEXT>>>";

// Distinctive task phrases, one per call site. The generative mock dispatches
// on them; changing one here changes it everywhere.
inline constexpr const char* kTaskGenerate = "Compose question-answer pairs from the source text";
inline constexpr const char* kTaskAdjudicate = "Audit the question-answer pair against the source text";
inline constexpr const char* kTaskDistract = "Invent three incorrect answer options";
inline constexpr const char* kTaskAppraise = "Appraise each candidate distractor";
inline constexpr const char* kTaskReplace = "Invent one replacement distractor";
inline constexpr const char* kTaskBackfill = "Write the reasoning trace for the pair below";
inline constexpr const char* kTaskRepair = "Reconstruct the malformed record below as strict JSON";

struct PromptConfig {
    double gen_temperature = 0.7;   // creative calls: generation, distractors
    double judge_temperature = 0.0; // judgment calls: adjudication, appraisal
    int max_output_tokens = 1024;
};

struct GenerationSpec {
    int n_explicit = 0;
    int n_implicit = 0;
    bool require_role_transformation = true;
    int total() const { return n_explicit + n_implicit; }
};

namespace detail {

inline std::string fenced(const std::string& text) {
    return std::string(kTextOpen) + text + kTextClose;
}

inline GenParams gen_params(const PromptConfig& cfg, bool judging) {
    GenParams p;
    p.temperature = judging ? cfg.judge_temperature : cfg.gen_temperature;
    p.max_output_tokens = cfg.max_output_tokens;
    return p;
}

}  // namespace detail

inline ChatPrompt build_generation_prompt(const Segment& segment, const GenerationSpec& spec,
                                          const PromptConfig& cfg = {}) {
    std::string u;
    u += kTaskGenerate;
    u += ".\n\n";
    u += detail::fenced(segment.text);
    u += "\n\nRequirements:\n";
    if (spec.n_explicit > 0) {
        u += "- Write exactly " + std::to_string(spec.n_explicit) +
             " explicit questions. Each targets a concrete entity, quantity, or stated fact, "
             "and its answer must be quoted verbatim from the source text.\n";
    }
    if (spec.n_implicit > 0) {
        u += "- Write exactly " + std::to_string(spec.n_implicit) +
             " implicit questions. Each requires inference across the source text (causes, "
             "comparisons, implications) and must include a step-by-step reasoning trace that "
             "cites only the source text.\n";
    }
    if (spec.require_role_transformation) {
        u += "- Vary the phrasing: recast the same facts under different grammatical roles "
             "(agent, patient, instrument, location) so questions do not share surface form, "
             "while keeping each answer unchanged.\n";
    }
    u += "- Do not use outside knowledge.\n";
    u += "\nOutput a JSON array, nothing else. Each element:\n"
         "{\"question\": str, \"answer\": str, \"type\": \"explicit\"|\"implicit\", "
         "\"reasoning\": str|null}\n";
    u += "reasoning is required for implicit questions and null for explicit ones.\n";

    ChatPrompt p;
    p.system = "You write precise question-answer pairs grounded in a given text. You output only JSON.";
    p.user = std::move(u);
    p.params = detail::gen_params(cfg, false);
    return p;
}

// Appended to the conversation when a generation reply failed to parse or
// failed schema checks.
inline std::string corrective_instruction(const std::string& defect) {
    return "Your previous reply was rejected: " + defect +
           ". Reply again with only the JSON array, no prose, no code fences.";
}

inline constexpr const char* kGroundingWarning =
    "Warning: the stated answer was not found in the source text, even after "
    "normalization. Treat unsupported answers as hallucinations.";

inline ChatPrompt build_adjudication_prompt(const QAPair& qa, const Segment& segment,
                                            const GroundingReport& grounding,
                                            const PromptConfig& cfg = {}) {
    std::string u;
    u += kTaskAdjudicate;
    u += ".\n\n";
    u += detail::fenced(segment.text);
    u += "\n\nPair under audit:\n";
    u += "question: " + qa.question + "\n";
    u += "answer: " + qa.answer + "\n";
    u += "labeled type: " + std::string(to_string(qa.qtype)) + "\n";
    if (!grounding.answer_found && grounding.match_kind == MatchKind::NotFound) {
        u += "\n";
        u += kGroundingWarning;
        u += "\n";
    }
    u += "\nIssue exactly one directive:\n"
         "- KEEP: the answer is supported by the source text and the type label is right.\n"
         "- DELETE: the pair is unsupported by the source text, contradicts it, or relies "
         "on outside knowledge.\n"
         "- TYPEFIX: the pair is supported but the type label is wrong (an \"implicit\" "
         "question whose answer is directly retrievable from the text is explicit, and "
         "vice versa).\n";
    u += "\nOutput one JSON object, nothing else:\n"
         "{\"directive\": \"KEEP\"|\"DELETE\"|\"TYPEFIX\", "
         "\"corrected_type\": \"explicit\"|\"implicit\"|null, \"rationale\": str}\n"
         "corrected_type is required for TYPEFIX and null otherwise.\n";

    ChatPrompt p;
    p.system = "You audit question-answer pairs strictly against a source text. You output only JSON.";
    p.user = std::move(u);
    p.params = detail::gen_params(cfg, true);
    return p;
}

inline ChatPrompt build_distractor_prompt(const QAPair& qa, const Segment& segment,
                                          const PromptConfig& cfg = {}) {
    std::string u;
    u += kTaskDistract;
    u += " for the question below.\n\n";
    u += detail::fenced(segment.text);
    u += "\n\nQuestion: " + qa.question + "\n";
    u += "Correct answer: " + qa.answer + "\n";
    u += "\nRequirements:\n"
         "- 3 distractors, each semantically close to the correct answer yet clearly wrong "
         "given the source text.\n"
         "- Each must be anchored in the source text: reuse its entities and vocabulary "
         "rather than inventing foreign material.\n"
         "- Exactly one distractor must exploit a nuanced semantic deviation (slight "
         "distortion of degree, scope, agent, or time) so it is the hardest to reject; "
         "report its index.\n"
         "- No distractor may equal the correct answer or another distractor, even "
         "ignoring case and punctuation.\n";
    u += "\nOutput one JSON object, nothing else:\n"
         "{\"distractors\": [str, str, str], \"nuanced_index\": 0|1|2}\n";

    ChatPrompt p;
    p.system = "You craft plausible but false answer options grounded in a source text. You output only JSON.";
    p.user = std::move(u);
    p.params = detail::gen_params(cfg, false);
    return p;
}

inline ChatPrompt build_appraisal_prompt(const QAPair& qa,
                                         const std::vector<std::string>& distractors,
                                         const Segment& segment, const PromptConfig& cfg = {}) {
    std::string u;
    u += kTaskAppraise;
    u += " for quality.\n\n";
    u += detail::fenced(segment.text);
    u += "\n\nQuestion: " + qa.question + "\n";
    u += "Correct answer: " + qa.answer + "\n";
    u += "Distractors:\n";
    for (std::size_t i = 0; i < distractors.size(); ++i) {
        u += std::to_string(i) + ": " + distractors[i] + "\n";
    }
    u += "\nMark a distractor \"regenerate\" if it is actually correct, trivially "
         "implausible, duplicates another option, or is ungrounded in the source text; "
         "otherwise mark it \"acceptable\".\n";
    u += "\nOutput one JSON object, nothing else:\n"
         "{\"appraisals\": [{\"verdict\": \"acceptable\"|\"regenerate\", \"reason\": str}, "
         "... exactly " +
         std::to_string(distractors.size()) + " entries]}\n";

    ChatPrompt p;
    p.system = "You appraise multiple-choice distractors against a source text. You output only JSON.";
    p.user = std::move(u);
    p.params = detail::gen_params(cfg, true);
    return p;
}

inline ChatPrompt build_replacement_prompt(const QAPair& qa, const Segment& segment,
                                           const std::vector<std::string>& avoid,
                                           const std::string& defect,
                                           const PromptConfig& cfg = {}) {
    std::string u;
    u += kTaskReplace;
    u += " for the question below.\n\n";
    u += detail::fenced(segment.text);
    u += "\n\nQuestion: " + qa.question + "\n";
    u += "Correct answer: " + qa.answer + "\n";
    u += "Rejected for: " + defect + "\n";
    u += "Must differ from all of:\n";
    for (const auto& a : avoid) u += "- " + a + "\n";
    u += "\nThe replacement must be plausible, wrong given the source text, and anchored "
         "in the source text.\n";
    u += "\nOutput one JSON object, nothing else:\n{\"distractor\": str}\n";

    ChatPrompt p;
    p.system = "You craft plausible but false answer options grounded in a source text. You output only JSON.";
    p.user = std::move(u);
    p.params = detail::gen_params(cfg, false);
    return p;
}

inline ChatPrompt build_backfill_prompt(const QAPair& qa, const Segment& segment,
                                        const PromptConfig& cfg = {}) {
    std::string u;
    u += kTaskBackfill;
    u += ".\n\n";
    u += detail::fenced(segment.text);
    u += "\n\nQuestion: " + qa.question + "\n";
    u += "Answer: " + qa.answer + "\n";
    u += "\nWrite the step-by-step reasoning that derives the answer from the source text "
         "alone.\n";
    u += "\nOutput one JSON object, nothing else:\n{\"reasoning\": str}\n";

    ChatPrompt p;
    p.system = "You explain how an answer follows from a source text. You output only JSON.";
    p.user = std::move(u);
    p.params = detail::gen_params(cfg, true);
    return p;
}

inline ChatPrompt build_repair_prompt(const std::string& raw, const std::string& schema_hint,
                                      const PromptConfig& cfg = {}) {
    std::string u;
    u += kTaskRepair;
    u += ".\n\nExpected shape: " + schema_hint + "\n\nMalformed record:\n";
    u += detail::fenced(raw);
    u += "\n\nPreserve the content; fix only the syntax. If the content cannot be "
         "recovered, output {\"unrepairable\": true}.\n";

    ChatPrompt p;
    p.system = "You repair malformed JSON records without altering their content. You output only JSON.";
    p.user = std::move(u);
    p.params = detail::gen_params(cfg, true);
    return p;
}

}  // namespace dscore
