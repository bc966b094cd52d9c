#include <doctest.h>

#include <limits>

#include "msrag/core.hpp"

using namespace msrag;

namespace {

SourceRegistry two_source_registry() {
    SourceRegistry reg;
    reg.add_source(SourceId("PERSONA"), {{"p1", SourceId("PERSONA"), "likes tea"},
                                         {"p2", SourceId("PERSONA"), "lives in Lyon"}});
    reg.add_source(SourceId("DOCUMENTS"),
                   {{"d1", SourceId("DOCUMENTS"), "tea facts"},
                    {"d2", SourceId("DOCUMENTS"), "city facts"}},
                   {SourceId("PERSONA")});
    reg.validate();
    return reg;
}

}  // namespace

TEST_CASE("source ids reject anything but uppercase printable tokens") {
    CHECK_NOTHROW(SourceId("PERSONA"));
    CHECK_NOTHROW(SourceId("KB_2"));
    CHECK_THROWS_AS(SourceId(""), SchemaError);
    CHECK_THROWS_AS(SourceId("persona"), SchemaError);
    CHECK_THROWS_AS(SourceId("Persona"), SchemaError);
    CHECK_THROWS_AS(SourceId("TWO WORDS"), SchemaError);
    CHECK_THROWS_AS(SourceId("TAB\tX"), SchemaError);
    CHECK_THROWS_AS(SourceId("caf\xc3\xa9"), SchemaError);
    // Reserved wire tokens can never name a source.
    CHECK_THROWS_AS(SourceId("NULL"), SchemaError);
    CHECK_THROWS_AS(SourceId("[SOURCE]"), SchemaError);
    CHECK_THROWS_AS(SourceId("[EOS]"), SchemaError);
    CHECK_THROWS_AS(SourceId("[EVIDENCE]"), SchemaError);
    CHECK_THROWS_AS(SourceId("[EOE]"), SchemaError);
}

TEST_CASE("reserved token set") {
    CHECK(tokens::is_reserved("NULL"));
    CHECK(tokens::is_reserved("[SOURCE]"));
    CHECK(tokens::is_reserved("[EOS]"));
    CHECK(tokens::is_reserved("[EVIDENCE]"));
    CHECK(tokens::is_reserved("[EOE]"));
    CHECK_FALSE(tokens::is_reserved("PERSONA"));
}

TEST_CASE("relevance scores live on the eleven-token grid") {
    CHECK(RelevanceScore::from_tenths(0).token() == "0.0");
    CHECK(RelevanceScore::from_tenths(7).token() == "0.7");
    CHECK(RelevanceScore::from_tenths(10).token() == "1.0");
    CHECK(RelevanceScore::from_tenths(10).value() == doctest::Approx(1.0));
    CHECK_THROWS_AS(RelevanceScore::from_tenths(-1), RangeError);
    CHECK_THROWS_AS(RelevanceScore::from_tenths(11), RangeError);

    CHECK(RelevanceScore::from_token("0.3") == RelevanceScore::from_tenths(3));
    CHECK(RelevanceScore::from_token("1.0") == RelevanceScore::from_tenths(10));
    CHECK_THROWS_AS(RelevanceScore::from_token("0.35"), ParseError);
    CHECK_THROWS_AS(RelevanceScore::from_token("1.1"), ParseError);
    CHECK_THROWS_AS(RelevanceScore::from_token(""), ParseError);
    CHECK_THROWS_AS(RelevanceScore::from_token("x"), ParseError);

    CHECK(RelevanceScore::from_tenths(2) < RelevanceScore::from_tenths(3));
}

TEST_CASE("quantize_score snaps to the nearest tenth, midpoints up") {
    CHECK(quantize_score(0.0) == RelevanceScore::from_tenths(0));
    CHECK(quantize_score(1.0) == RelevanceScore::from_tenths(10));
    CHECK(quantize_score(0.04) == RelevanceScore::from_tenths(0));
    CHECK(quantize_score(0.05) == RelevanceScore::from_tenths(1));
    CHECK(quantize_score(0.15) == RelevanceScore::from_tenths(2));
    CHECK(quantize_score(0.24) == RelevanceScore::from_tenths(2));
    CHECK(quantize_score(0.25) == RelevanceScore::from_tenths(3));
    CHECK(quantize_score(0.649) == RelevanceScore::from_tenths(6));
    CHECK(quantize_score(0.65) == RelevanceScore::from_tenths(7));
    CHECK(quantize_score(0.95) == RelevanceScore::from_tenths(10));
    CHECK(quantize_score(0.949) == RelevanceScore::from_tenths(9));

    CHECK_THROWS_AS(quantize_score(-0.001), RangeError);
    CHECK_THROWS_AS(quantize_score(1.001), RangeError);
    CHECK_THROWS_AS(quantize_score(std::numeric_limits<double>::quiet_NaN()), RangeError);
}

TEST_CASE("dialogue contexts must end on a user turn") {
    CHECK_THROWS_AS(DialogueContext(std::vector<Turn>{}), SchemaError);
    CHECK_THROWS_AS(DialogueContext({{Role::user, "hi"}, {Role::system, "hello"}}), SchemaError);
    DialogueContext ctx({{Role::user, "hi"}, {Role::system, "hello"}, {Role::user, "bye?"}});
    CHECK(ctx.turns().size() == 3);
    CHECK(ctx.last_user_turn().text == "bye?");
}

TEST_CASE("context rendering is one prefixed line per turn") {
    DialogueContext ctx({{Role::user, "hi"}, {Role::system, "hello"}, {Role::user, "bye?"}});
    CHECK(render_context(ctx) == "User: hi\nSystem: hello\nUser: bye?");
    CHECK(context_query_text(ctx) == "hi\nhello\nbye?");
}

TEST_CASE("registry rejects duplicates and validates references") {
    SourceRegistry reg = two_source_registry();
    CHECK(reg.size() == 2);
    CHECK(reg.sources()[0] == SourceId("PERSONA"));
    CHECK(reg.has_source(SourceId("DOCUMENTS")));
    CHECK(reg.docs(SourceId("PERSONA")).size() == 2);
    CHECK(reg.depends_on(SourceId("DOCUMENTS")) ==
          std::vector<SourceId>{SourceId("PERSONA")});
    CHECK(reg.find_evidence("d2") != nullptr);
    CHECK(reg.find_evidence("zzz") == nullptr);

    SourceRegistry dup;
    dup.add_source(SourceId("A"), {{"x", SourceId("A"), "t"}});
    CHECK_THROWS_AS(dup.add_source(SourceId("A"), {{"y", SourceId("A"), "t"}}), SchemaError);

    SourceRegistry dup_ev;
    dup_ev.add_source(SourceId("A"), {{"x", SourceId("A"), "t"}});
    CHECK_THROWS_AS(dup_ev.add_source(SourceId("B"), {{"x", SourceId("B"), "t"}}), SchemaError);

    SourceRegistry wrong_tag;
    CHECK_THROWS_AS(wrong_tag.add_source(SourceId("A"), {{"x", SourceId("B"), "t"}}),
                    SchemaError);

    SourceRegistry dangling;
    dangling.add_source(SourceId("A"), {{"a1", SourceId("A"), "t"}}, {SourceId("MISSING")});
    CHECK_THROWS_AS(dangling.validate(), SchemaError);

    SourceRegistry dangling_parent;
    Evidence orphan{"b1", SourceId("B"), "t"};
    orphan.parent = "nope";
    dangling_parent.add_source(SourceId("B"), {orphan});
    CHECK_THROWS_AS(dangling_parent.validate(), SchemaError);

    SourceRegistry cyclic;
    cyclic.add_source(SourceId("A"), {{"a1", SourceId("A"), "t"}}, {SourceId("B")});
    cyclic.add_source(SourceId("B"), {{"b1", SourceId("B"), "t"}}, {SourceId("A")});
    CHECK_THROWS_AS(cyclic.validate(), SchemaError);
    CHECK_THROWS_AS(cyclic.topological_order(), SchemaError);
}

TEST_CASE("topological order follows insertion order among ready sources") {
    SourceRegistry reg;
    reg.add_source(SourceId("C"), {{"c1", SourceId("C"), "t"}}, {SourceId("A")});
    reg.add_source(SourceId("B"), {{"b1", SourceId("B"), "t"}});
    reg.add_source(SourceId("A"), {{"a1", SourceId("A"), "t"}});
    std::vector<SourceId> order = reg.topological_order();
    // B and A are immediately ready (insertion order), C waits for A.
    CHECK(order == std::vector<SourceId>{SourceId("B"), SourceId("A"), SourceId("C")});
}

TEST_CASE("plan serialization round-trips through the wire format") {
    SourceRegistry reg = two_source_registry();
    Plan plan{{SourceId("PERSONA"), SourceId("DOCUMENTS")}};
    CHECK(serialize_plan(plan) == "[SOURCE] PERSONA DOCUMENTS [EOS]");
    CHECK(serialize_plan(Plan{}) == "[SOURCE] NULL [EOS]");

    ParsedPlan parsed = parse_plan(serialize_plan(plan), reg);
    CHECK(parsed.plan == plan);
    CHECK(parsed.dropped.empty());
    CHECK(parse_plan(serialize_plan(Plan{}), reg).plan.is_null());
}

TEST_CASE("parse_plan tolerates noisy model output") {
    SourceRegistry reg = two_source_registry();

    // Text around the [SOURCE]..[EOS] region is ignored.
    ParsedPlan p = parse_plan("Sure! [SOURCE] PERSONA, DOCUMENTS [EOS] hope that helps", reg);
    CHECK(p.plan.ordered == std::vector<SourceId>{SourceId("PERSONA"), SourceId("DOCUMENTS")});

    // Without the markers the whole string is scanned.
    CHECK(parse_plan("PERSONA DOCUMENTS", reg).plan.size() == 2);

    // Leading NULL means the empty plan; a later NULL is just dropped.
    CHECK(parse_plan("[SOURCE] NULL [EOS]", reg).plan.is_null());
    ParsedPlan late_null = parse_plan("[SOURCE] PERSONA NULL [EOS]", reg);
    CHECK(late_null.plan.ordered == std::vector<SourceId>{SourceId("PERSONA")});
    CHECK(late_null.dropped == std::vector<std::string>{"NULL"});

    // Duplicates keep the first occurrence; unknown names are dropped.
    ParsedPlan dup = parse_plan("[SOURCE] PERSONA PERSONA DOCUMENTS [EOS]", reg);
    CHECK(dup.plan.ordered == std::vector<SourceId>{SourceId("PERSONA"), SourceId("DOCUMENTS")});
    CHECK(dup.dropped == std::vector<std::string>{"PERSONA"});
    ParsedPlan unknown = parse_plan("[SOURCE] WIKI PERSONA [EOS]", reg);
    CHECK(unknown.plan.ordered == std::vector<SourceId>{SourceId("PERSONA")});
    CHECK(unknown.dropped == std::vector<std::string>{"WIKI"});

    CHECK_THROWS_AS(parse_plan("", reg), ParseError);
    CHECK_THROWS_AS(parse_plan("no sources here at all", reg), ParseError);
    try {
        parse_plan("gibberish output", reg);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.raw == "gibberish output");
    }
}

TEST_CASE("validate_plan reports each violation kind") {
    SourceRegistry reg = two_source_registry();

    CHECK(plan_is_valid(Plan{}, reg));
    CHECK(plan_is_valid(Plan{{SourceId("PERSONA")}}, reg));
    CHECK(plan_is_valid(Plan{{SourceId("PERSONA"), SourceId("DOCUMENTS")}}, reg));

    auto missing = validate_plan(Plan{{SourceId("DOCUMENTS")}}, reg);
    REQUIRE(missing.size() == 1);
    CHECK(missing[0].kind == PlanViolation::Kind::missing_dependency);
    CHECK(missing[0].source == SourceId("DOCUMENTS"));
    CHECK(missing[0].dependency == SourceId("PERSONA"));

    auto misordered = validate_plan(Plan{{SourceId("DOCUMENTS"), SourceId("PERSONA")}}, reg);
    REQUIRE(misordered.size() == 1);
    CHECK(misordered[0].kind == PlanViolation::Kind::misordered_dependency);

    auto dup = validate_plan(Plan{{SourceId("PERSONA"), SourceId("PERSONA")}}, reg);
    REQUIRE(dup.size() == 1);
    CHECK(dup[0].kind == PlanViolation::Kind::duplicate_source);

    auto unknown = validate_plan(Plan{{SourceId("WIKI")}}, reg);
    REQUIRE(unknown.size() == 1);
    CHECK(unknown[0].kind == PlanViolation::Kind::unknown_source);
    CHECK_FALSE(unknown[0].to_string().empty());
}
