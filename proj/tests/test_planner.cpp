#include <doctest.h>

#include <string>

#include "msrag/planner.hpp"

using namespace msrag;

namespace {

SourceRegistry chained_registry() {
    SourceRegistry registry;
    registry.add_source(SourceId("PERSONA"), {{"p1", SourceId("PERSONA"), "I like hiking"},
                                              {"p2", SourceId("PERSONA"), "I collect vinyl"}});
    registry.add_source(SourceId("DOCUMENTS"), {{"d1", SourceId("DOCUMENTS"), "trail guide"}},
                        {SourceId("PERSONA")});
    return registry;
}

DialogueContext one_turn() { return DialogueContext({{Role::user, "hi"}}); }

}  // namespace

TEST_CASE("planning prompt renders sources, demonstrations, and the dialogue") {
    SourceRegistry registry = chained_registry();
    PlannerConfig config;

    SUBCASE("zero-shot rendering is frozen") {
        config.gen.temperature = 0.25;
        ChatRequest request = build_planning_prompt(one_turn(), registry, config);
        REQUIRE(request.messages.size() == 1);
        CHECK(request.messages[0].role == "user");
        CHECK(request.params.temperature == 0.25);

        const std::string& prompt = request.messages[0].text;
        CHECK(prompt.find("- PERSONA: 2 documents\n") != std::string::npos);
        CHECK(prompt.find("- DOCUMENTS: 1 documents (consult after PERSONA)") !=
              std::string::npos);
        CHECK(prompt.find("Dialogue:\nUser: hi\nAnswer:") != std::string::npos);
        CHECK(prompt.find("{sources}") == std::string::npos);
        CHECK(prompt.find("{demonstrations}") == std::string::npos);
        CHECK(prompt.find("{context}") == std::string::npos);
    }

    SUBCASE("demonstrations become worked Dialogue/Answer blocks") {
        Demonstration demo{DialogueContext({{Role::user, "recommend a record"}}),
                           Plan{{SourceId("PERSONA")}}};
        config.demonstrations = {demo};
        ChatRequest request = build_planning_prompt(one_turn(), registry, config);
        CHECK(request.messages[0].text.find(
                  "Dialogue:\nUser: recommend a record\nAnswer: [SOURCE] PERSONA [EOS]\n\n") !=
              std::string::npos);
    }

    SUBCASE("custom templates replace every placeholder occurrence") {
        config.template_text = "{context}|{context}|{sources}";
        ChatRequest request = build_planning_prompt(one_turn(), registry, config);
        CHECK(request.messages[0].text ==
              "User: hi|User: hi|- PERSONA: 2 documents\n"
              "- DOCUMENTS: 1 documents (consult after PERSONA)");
    }
}

TEST_CASE("degenerate planner backends") {
    SourceRegistry registry = chained_registry();
    PlannerConfig config;

    SUBCASE("always-null emits the empty plan") {
        config.backend = PlannerBackend::always_null;
        PlanResult result = plan_sources(one_turn(), registry, config, nullptr);
        CHECK(result.plan.is_null());
        CHECK(result.raw_output.empty());
        CHECK_FALSE(result.fallback_used);
    }

    SUBCASE("always-all consults every source in dependency order") {
        config.backend = PlannerBackend::always_all;
        PlanResult result = plan_sources(one_turn(), registry, config, nullptr);
        CHECK(result.plan.ordered ==
              std::vector<SourceId>{SourceId("PERSONA"), SourceId("DOCUMENTS")});
        CHECK(validate_plan(result.plan, registry).empty());
    }

    SUBCASE("oracle copies the gold plan") {
        config.backend = PlannerBackend::oracle;
        Plan gold;
        gold.ordered = {SourceId("PERSONA")};
        PlanResult result = plan_sources(one_turn(), registry, config, nullptr, &gold);
        CHECK(result.plan == gold);
        CHECK_FALSE(result.fallback_used);
    }

    SUBCASE("oracle without a gold plan is a configuration error") {
        config.backend = PlannerBackend::oracle;
        CHECK_THROWS_AS(plan_sources(one_turn(), registry, config, nullptr), ConfigError);
    }

    SUBCASE("an invalid gold plan follows the fallback policy") {
        config.backend = PlannerBackend::oracle;
        Plan bad;
        bad.ordered = {SourceId("DOCUMENTS")};  // missing its PERSONA prerequisite
        PlanResult result = plan_sources(one_turn(), registry, config, nullptr, &bad);
        CHECK(result.plan.is_null());
        CHECK(result.fallback_used);
        CHECK_FALSE(result.violations.empty());

        config.fallback = PlannerFallback::error;
        CHECK_THROWS_AS(plan_sources(one_turn(), registry, config, nullptr, &bad), ParseError);
    }
}

TEST_CASE("llm planner parses the wire form and applies the fallback policy") {
    SourceRegistry registry = chained_registry();
    PlannerConfig config;
    config.backend = PlannerBackend::llm_zero_shot;

    SUBCASE("a chat provider is mandatory") {
        CHECK_THROWS_AS(plan_sources(one_turn(), registry, config, nullptr), ConfigError);
    }

    SUBCASE("well-formed output becomes the plan") {
        ScriptedChatProvider chat;
        chat.set_default_reply("[SOURCE] PERSONA DOCUMENTS [EOS]");
        PlanResult result = plan_sources(one_turn(), registry, config, &chat);
        CHECK(result.plan.ordered ==
              std::vector<SourceId>{SourceId("PERSONA"), SourceId("DOCUMENTS")});
        CHECK(result.raw_output == "[SOURCE] PERSONA DOCUMENTS [EOS]");
        CHECK_FALSE(result.fallback_used);
        CHECK(result.dropped.empty());
        CHECK(chat.call_count() == 1);
    }

    SUBCASE("unknown tokens are dropped and reported, not fatal") {
        ScriptedChatProvider chat;
        chat.set_default_reply("Sure! [SOURCE] PERSONA BOGUS [EOS] hope that helps");
        PlanResult result = plan_sources(one_turn(), registry, config, &chat);
        CHECK(result.plan.ordered == std::vector<SourceId>{SourceId("PERSONA")});
        CHECK(result.dropped == std::vector<std::string>{"BOGUS"});
        CHECK_FALSE(result.fallback_used);
    }

    SUBCASE("unparseable output falls back to the empty plan") {
        ScriptedChatProvider chat;
        chat.set_default_reply("I really could not say.");
        PlanResult result = plan_sources(one_turn(), registry, config, &chat);
        CHECK(result.plan.is_null());
        CHECK(result.fallback_used);
        CHECK(result.raw_output == "I really could not say.");
    }

    SUBCASE("fallback=error propagates the parse failure with the raw reply") {
        ScriptedChatProvider chat;
        chat.set_default_reply("I really could not say.");
        config.fallback = PlannerFallback::error;
        try {
            plan_sources(one_turn(), registry, config, &chat);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.raw == "I really could not say.");
        }
    }

    SUBCASE("a dependency-breaking plan is replaced, never repaired") {
        ScriptedChatProvider chat;
        chat.set_default_reply("[SOURCE] DOCUMENTS [EOS]");
        PlanResult result = plan_sources(one_turn(), registry, config, &chat);
        CHECK(result.plan.is_null());  // not silently rewritten to PERSONA DOCUMENTS
        CHECK(result.fallback_used);
        REQUIRE_FALSE(result.violations.empty());
        CHECK(result.violations[0].kind == PlanViolation::Kind::missing_dependency);

        config.fallback = PlannerFallback::error;
        CHECK_THROWS_AS(plan_sources(one_turn(), registry, config, &chat), ParseError);
    }

    SUBCASE("provider failures propagate regardless of the fallback policy") {
        ScriptedChatProvider chat;  // nothing scripted, no default reply
        CHECK_THROWS_AS(plan_sources(one_turn(), registry, config, &chat), ProviderError);
    }
}

TEST_CASE("in-context planner requires demonstrations and embeds them") {
    SourceRegistry registry = chained_registry();
    PlannerConfig config;
    config.backend = PlannerBackend::llm_icl;

    ScriptedChatProvider chat;
    chat.set_default_reply("[SOURCE] NULL [EOS]");
    CHECK_THROWS_AS(plan_sources(one_turn(), registry, config, &chat), ConfigError);

    config.demonstrations = {Demonstration{DialogueContext({{Role::user, "recommend a record"}}),
                                           Plan{{SourceId("PERSONA")}}}};
    PlanResult result = plan_sources(one_turn(), registry, config, &chat);
    CHECK(result.plan.is_null());
    CHECK_FALSE(result.fallback_used);  // an explicit NULL answer is a parse success
    REQUIRE(chat.call_count() == 1);
    CHECK(chat.call_log()[0].prompt.find("Answer: [SOURCE] PERSONA [EOS]") != std::string::npos);
}

TEST_CASE("planner backend names round-trip") {
    for (PlannerBackend backend :
         {PlannerBackend::llm_zero_shot, PlannerBackend::llm_icl, PlannerBackend::oracle,
          PlannerBackend::always_all, PlannerBackend::always_null}) {
        CHECK(planner_backend_from_string(to_string(backend)) == backend);
    }
    CHECK_THROWS_AS(planner_backend_from_string("sometimes"), ParseError);
}
