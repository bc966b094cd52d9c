#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "msrag/reader.hpp"

using namespace msrag;
using nlohmann::json;

namespace {

ScoredEvidence item(const std::string& id, const std::string& source, const std::string& text,
                    int tenths) {
    return {{id, SourceId(source), text}, RelevanceScore::from_tenths(tenths)};
}

std::vector<std::string> ids_of(const std::vector<ScoredEvidence>& items) {
    std::vector<std::string> ids;
    for (const ScoredEvidence& it : items) ids.push_back(it.evidence.id);
    return ids;
}

Sample training_sample() {
    json record = json::parse(R"({
        "id": "s1",
        "context": [{"role": "user", "text": "tell me about tea"}],
        "sources": {
            "PERSONA": {"docs": [
                {"id": "p1", "text": "I drink green tea daily"},
                {"id": "p2", "text": "I play badminton"}
            ]}
        },
        "label_plan": ["PERSONA"],
        "label_evidence": {"PERSONA": ["p1"]},
        "response": "You enjoy green tea."
    })");
    return sample_from_json(record, "s1");
}

LabelCache labels_for(const Sample& sample, ScorerKind scorer) {
    LabelCache cache;
    int tenths = 9;
    for (const SourceId& source : sample.registry.sources()) {
        for (const Evidence& doc : sample.registry.docs(source)) {
            LabelCacheEntry entry;
            entry.sample_id = sample.id;
            entry.evidence_id = doc.id;
            entry.score = RelevanceScore::from_tenths(tenths);
            entry.scorer = scorer;
            tenths = 2;
            cache.put(entry);
        }
    }
    return cache;
}

}  // namespace

TEST_CASE("evidence shuffling is seeded and order-complete") {
    std::vector<ScoredEvidence> five = {item("e1", "S", "a", 1), item("e2", "S", "b", 2),
                                        item("e3", "S", "c", 3), item("e4", "S", "d", 4),
                                        item("e5", "S", "e", 5)};

    // Frozen permutations: records must be byte-identical across platforms,
    // so the orders themselves are part of the contract.
    CHECK(ids_of(shuffle_evidence(five, 0)) ==
          std::vector<std::string>{"e3", "e1", "e2", "e4", "e5"});
    CHECK(ids_of(shuffle_evidence(five, 42)) ==
          std::vector<std::string>{"e3", "e4", "e5", "e1", "e2"});
    CHECK(ids_of(shuffle_evidence(five, 0)) == ids_of(shuffle_evidence(five, 0)));

    std::vector<std::string> shuffled = ids_of(shuffle_evidence(five, 1234567));
    std::vector<std::string> original = ids_of(five);
    std::sort(shuffled.begin(), shuffled.end());
    std::sort(original.begin(), original.end());
    CHECK(shuffled == original);

    CHECK(shuffle_evidence({}, 0).empty());
    CHECK(ids_of(shuffle_evidence({five[0]}, 99)) == std::vector<std::string>{"e1"});
}

TEST_CASE("assembled input is the frozen wire text, tiled by segments") {
    DialogueContext context({{Role::user, "hi"}});
    Plan plan{{SourceId("PERSONA")}};
    std::vector<ScoredEvidence> evidences = {item("p1", "PERSONA", "I like hiking", 8),
                                             item("p2", "PERSONA", "I collect vinyl", 3)};

    AssembledPrompt prompt = assemble_input(context, plan, evidences);
    CHECK(prompt.text ==
          "User: hi\n[SOURCE] PERSONA [EOS]"
          " [EVIDENCE] I like hiking [EOE] 0.8"
          " [EVIDENCE] I collect vinyl [EOE] 0.3 ");

    REQUIRE(prompt.segments.size() == 7);
    std::vector<SegmentKind> kinds;
    std::vector<int> indexes;
    for (const Segment& segment : prompt.segments) {
        kinds.push_back(segment.kind);
        indexes.push_back(segment.index);
    }
    CHECK(kinds == std::vector<SegmentKind>{SegmentKind::context, SegmentKind::source_header,
                                            SegmentKind::evidence, SegmentKind::sim,
                                            SegmentKind::evidence, SegmentKind::sim,
                                            SegmentKind::response_slot});
    CHECK(indexes == std::vector<int>{-1, -1, 0, 0, 1, 1, -1});

    // Segments tile the text exactly: contiguous, in order, covering all of it.
    CHECK(prompt.segments.front().begin == 0);
    for (std::size_t i = 1; i < prompt.segments.size(); ++i) {
        CHECK(prompt.segments[i].begin == prompt.segments[i - 1].end);
    }
    CHECK(prompt.segments.back().end == prompt.text.size());

    std::size_t sim0 = prompt.segments[3].begin;
    CHECK(prompt.text.substr(sim0, prompt.segments[3].end - sim0) == " 0.8");
}

TEST_CASE("the NULL decision renders alone and refuses evidence") {
    DialogueContext context({{Role::user, "hi"}});
    AssembledPrompt prompt = assemble_input(context, Plan{}, {});
    CHECK(prompt.text == "User: hi\n[SOURCE] NULL [EOS] ");
    REQUIRE(prompt.segments.size() == 3);
    CHECK(prompt.segments[2].kind == SegmentKind::response_slot);

    CHECK_THROWS_AS(assemble_input(context, Plan{}, {item("p1", "PERSONA", "x", 5)}),
                    SchemaError);
    // Evidence from a source the plan never consults is equally rejected.
    CHECK_THROWS_AS(assemble_input(context, Plan{{SourceId("PERSONA")}},
                                   {item("d1", "DOCUMENTS", "x", 5)}),
                    SchemaError);
}

TEST_CASE("attention mask isolates evidence items and their evaluation tokens") {
    DialogueContext context({{Role::user, "hi"}});
    Plan plan{{SourceId("PERSONA")}};

    SUBCASE("zero or one evidence degenerates to pure causal") {
        CHECK(build_attention_mask(assemble_input(context, Plan{}, {})).pure_causal());
        CHECK(build_attention_mask(
                  assemble_input(context, plan, {item("p1", "PERSONA", "a", 5)}))
                  .pure_causal());
    }

    SUBCASE("two evidence items block exactly the cross-item cells") {
        AssembledPrompt prompt = assemble_input(
            context, plan, {item("p1", "PERSONA", "a", 5), item("p2", "PERSONA", "b", 6)});
        AttentionMask mask = build_attention_mask(prompt);
        REQUIRE(mask.size() == 7);
        CHECK_FALSE(mask.pure_causal());
        // rows: 0 context, 1 header, 2 evidence0, 3 sim0, 4 evidence1, 5 sim1, 6 slot
        for (std::size_t r = 0; r < 7; ++r) {
            for (std::size_t c = 0; c < 7; ++c) {
                if (c > r) {
                    CHECK_FALSE(mask.allowed(r, c));  // never anti-causal
                    continue;
                }
                bool expect = true;
                if (r == 4 && (c == 2 || c == 3)) expect = false;  // other evidence + its token
                if (r == 5 && (c == 2 || c == 3)) expect = false;  // token sees only its own item
                CHECK(mask.allowed(r, c) == expect);
            }
        }
    }

    SUBCASE("mask storage must match its declared size") {
        CHECK_THROWS_AS(AttentionMask(2, {true, false}), RangeError);
        AttentionMask unit(1, {true});
        CHECK_THROWS_AS(unit.allowed(0, 1), RangeError);
        CHECK(unit.pure_causal());
    }
}

TEST_CASE("generation sends the assembled text and trims the reply") {
    DialogueContext context({{Role::user, "hi"}});
    AssembledPrompt prompt = assemble_input(context, Plan{}, {});

    ScriptedChatProvider chat;
    chat.set_default_reply("  a cup of tea sounds nice \n");
    GenParams params;
    params.max_tokens = 17;
    CHECK(generate_response(prompt, chat, params) == "a cup of tea sounds nice");
    REQUIRE(chat.call_count() == 1);
    CHECK(chat.call_log()[0].prompt == "user: " + prompt.text + "\n");

    ScriptedChatProvider blank;
    blank.set_default_reply("   \n ");
    CHECK_THROWS_AS(generate_response(prompt, blank), ProviderError);
}

TEST_CASE("training records carry labels, the reference, and the RLE mask") {
    Sample sample = training_sample();
    LabelCache cache = labels_for(sample, ScorerKind::dense);

    TrainingRecord record = emit_training_record(sample, cache, ScorerKind::dense, 0);
    CHECK(record.input == "User: tell me about tea");
    // input + joining newline + target reconstitute the full wire text.
    CHECK(record.full.text == record.input + "\n" + record.target);
    CHECK(record.target.rfind("You enjoy green tea.") ==
          record.target.size() - std::string("You enjoy green tea.").size());
    CHECK(record.full.segments.back().end == record.full.text.size());

    // Both labels appear as evaluation tokens (p1 -> 0.9, p2 -> 0.2).
    CHECK(record.target.find(" 0.9") != std::string::npos);
    CHECK(record.target.find(" 0.2") != std::string::npos);

    nlohmann::ordered_json exported = record.to_json();
    CHECK(exported.at("input") == record.input);
    CHECK(exported.at("target") == record.target);
    // Two evidence items: rows 4 and 5 each lose the other item's columns 2-3.
    json blocked = exported.at("mask").at("blocked");
    CHECK(blocked == json::parse("[[4,2,3],[5,2,3]]"));
    CHECK(exported.at("mask").at("segments").size() == record.full.segments.size());

    // The same seed reproduces the record byte for byte.
    CHECK(emit_training_record(sample, cache, ScorerKind::dense, 0).full.text ==
          record.full.text);

    LabelCache empty;
    try {
        emit_training_record(sample, empty, ScorerKind::dense, 0);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("p1") != std::string::npos);
    }
}
