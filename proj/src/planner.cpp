#include "msrag/planner.hpp"

#include <sstream>

namespace msrag {

std::string_view to_string(PlannerBackend backend) {
    switch (backend) {
        case PlannerBackend::llm_zero_shot: return "llm-zero-shot";
        case PlannerBackend::llm_icl: return "llm-icl";
        case PlannerBackend::oracle: return "oracle";
        case PlannerBackend::always_all: return "always-all";
        case PlannerBackend::always_null: return "always-null";
    }
    throw RangeError("unknown planner backend");
}

PlannerBackend planner_backend_from_string(std::string_view s) {
    if (s == "llm-zero-shot") return PlannerBackend::llm_zero_shot;
    if (s == "llm-icl") return PlannerBackend::llm_icl;
    if (s == "oracle") return PlannerBackend::oracle;
    if (s == "always-all") return PlannerBackend::always_all;
    if (s == "always-null") return PlannerBackend::always_null;
    throw ParseError("unknown planner backend: " + std::string(s), std::string(s));
}

namespace {

std::string describe_sources(const SourceRegistry& registry) {
    std::ostringstream out;
    bool first = true;
    for (const SourceId& source : registry.sources()) {
        if (!first) out << '\n';
        first = false;
        out << "- " << source.name() << ": " << registry.docs(source).size() << " documents";
        const std::vector<SourceId>& deps = registry.depends_on(source);
        if (!deps.empty()) {
            out << " (consult after";
            for (const SourceId& dep : deps) out << ' ' << dep.name();
            out << ')';
        }
    }
    return out.str();
}

std::string render_demonstrations(const std::vector<Demonstration>& demonstrations) {
    if (demonstrations.empty()) return "";
    std::ostringstream out;
    for (const Demonstration& demo : demonstrations) {
        out << "Dialogue:\n" << render_context(demo.context) << "\nAnswer: "
            << serialize_plan(demo.plan) << "\n\n";
    }
    return out.str();
}

std::string apply_placeholder(std::string text, const std::string& key, const std::string& value) {
    std::size_t pos;
    while ((pos = text.find(key)) != std::string::npos) {
        text.replace(pos, key.size(), value);
    }
    return text;
}

}  // namespace

ChatRequest build_planning_prompt(const DialogueContext& context, const SourceRegistry& registry,
                                  const PlannerConfig& config) {
    std::string prompt = config.template_text;
    prompt = apply_placeholder(prompt, "{sources}", describe_sources(registry));
    prompt = apply_placeholder(prompt, "{demonstrations}",
                               render_demonstrations(config.demonstrations));
    prompt = apply_placeholder(prompt, "{context}", render_context(context));

    ChatRequest request;
    request.params = config.gen;
    request.messages.push_back({"user", std::move(prompt)});
    return request;
}

PlanResult plan_sources(const DialogueContext& context, const SourceRegistry& registry,
                        const PlannerConfig& config, ChatProvider* chat,
                        const Plan* oracle_plan) {
    PlanResult result;
    switch (config.backend) {
        case PlannerBackend::always_null:
            return result;

        case PlannerBackend::always_all:
            result.plan.ordered = registry.topological_order();
            return result;

        case PlannerBackend::oracle: {
            if (oracle_plan == nullptr) {
                throw ConfigError("oracle planner needs a gold plan");
            }
            result.plan = *oracle_plan;
            result.violations = validate_plan(result.plan, registry);
            if (!result.violations.empty()) {
                if (config.fallback == PlannerFallback::error) {
                    throw ParseError("gold plan invalid: " + result.violations.front().to_string(),
                                     serialize_plan(*oracle_plan));
                }
                result.plan = Plan{};
                result.fallback_used = true;
            }
            return result;
        }

        case PlannerBackend::llm_icl:
            if (config.demonstrations.empty()) {
                throw ConfigError("llm-icl planner needs at least one demonstration");
            }
            [[fallthrough]];
        case PlannerBackend::llm_zero_shot: {
            if (chat == nullptr) {
                throw ConfigError("llm planner needs a chat provider");
            }
            result.raw_output = chat->chat(build_planning_prompt(context, registry, config));
            try {
                ParsedPlan parsed = parse_plan(result.raw_output, registry);
                result.plan = std::move(parsed.plan);
                result.dropped = std::move(parsed.dropped);
            } catch (const ParseError&) {
                if (config.fallback == PlannerFallback::error) throw;
                result.plan = Plan{};
                result.fallback_used = true;
                return result;
            }
            // Nothing invalid may reach retrieval: a plan that breaks the
            // dependency contract is replaced per the fallback policy, never
            // silently repaired.
            result.violations = validate_plan(result.plan, registry);
            if (!result.violations.empty()) {
                if (config.fallback == PlannerFallback::error) {
                    throw ParseError("plan failed validation: " +
                                         result.violations.front().to_string(),
                                     result.raw_output);
                }
                result.plan = Plan{};
                result.fallback_used = true;
            }
            return result;
        }
    }
    throw RangeError("unknown planner backend");
}

}  // namespace msrag
