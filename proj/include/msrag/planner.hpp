#pragma once
// Planning: decide which knowledge sources (if any) the response needs, and
// in what order. LLM backends emit the plan wire form and are parsed
// tolerantly; degenerate backends give oracle/floor/ceiling baselines.

#include <optional>
#include <string>
#include <vector>

#include "msrag/core.hpp"
#include "msrag/providers.hpp"

namespace msrag {

enum class PlannerBackend {
    llm_zero_shot,  // instruction prompt only
    llm_icl,        // instruction prompt plus worked demonstrations
    oracle,         // copies the gold plan
    always_all,     // every source in dependency order
    always_null,    // the empty plan
};

std::string_view to_string(PlannerBackend backend);
PlannerBackend planner_backend_from_string(std::string_view s);

// What to do when the model output parses to nothing usable.
enum class PlannerFallback {
    null,   // fall back to the empty plan and flag it
    error,  // propagate the ParseError
};

struct Demonstration {
    DialogueContext context;
    Plan plan;
};

inline constexpr std::string_view kDefaultPlanningTemplate =
    "You are the planning module of a dialogue system with access to external knowledge\n"
    "sources.\n"
    "\n"
    "Knowledge sources:\n"
    "{sources}\n"
    "\n"
    "Given the dialogue so far, decide which sources are required to answer the last user\n"
    "turn, and in what order they must be consulted. A source that depends on another must\n"
    "be listed after it. If no external knowledge is required, answer NULL.\n"
    "\n"
    "Answer with a single line of the form:\n"
    "[SOURCE] NAME1 NAME2 ... [EOS]\n"
    "or, when no source is needed:\n"
    "[SOURCE] NULL [EOS]\n"
    "\n"
    "{demonstrations}Dialogue:\n"
    "{context}\n"
    "Answer:";

struct PlannerConfig {
    PlannerBackend backend = PlannerBackend::llm_zero_shot;
    std::vector<Demonstration> demonstrations;  // required non-empty for llm_icl
    PlannerFallback fallback = PlannerFallback::null;
    std::string template_text = std::string(kDefaultPlanningTemplate);
    GenParams gen;
};

// Renders the planning prompt: {sources} becomes one "NAME: description"
// line per source (descriptions synthesized from pool size and dependencies),
// {demonstrations} the worked examples, {context} the rendered dialogue.
ChatRequest build_planning_prompt(const DialogueContext& context, const SourceRegistry& registry,
                                  const PlannerConfig& config);

struct PlanResult {
    Plan plan;
    std::string raw_output;              // model text, "" for degenerate backends
    bool fallback_used = false;
    std::vector<std::string> dropped;    // unknown tokens dropped during parsing
    std::vector<PlanViolation> violations;  // dependency breaches left in the plan
};

// Runs the configured backend. `oracle_plan` feeds the oracle backend and is
// ignored otherwise; llm backends require a chat provider. Parse failures
// follow the fallback policy; provider failures always propagate.
PlanResult plan_sources(const DialogueContext& context, const SourceRegistry& registry,
                        const PlannerConfig& config, ChatProvider* chat,
                        const Plan* oracle_plan = nullptr);

}  // namespace msrag
