#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "msrag/corpus.hpp"

using namespace msrag;
using nlohmann::json;

namespace {

json valid_record() {
    return json::parse(R"({
        "id": "s1",
        "context": [
            {"role": "user", "text": "hi"},
            {"role": "system", "text": "hello"},
            {"role": "user", "text": "where can I ride?"}
        ],
        "sources": {
            "PERSONA": {"docs": [
                {"id": "p1", "text": "I like cycling"},
                {"id": "p2", "text": "I live in Lyon"}
            ]},
            "DOCUMENTS": {
                "depends_on": ["PERSONA"],
                "docs": [
                    {"id": "d1", "text": "Lyon has river paths", "parent": "p2"},
                    {"id": "d2", "text": "bike shops downtown"}
                ]
            }
        },
        "label_plan": ["PERSONA", "DOCUMENTS"],
        "label_evidence": {"PERSONA": ["p1"], "DOCUMENTS": ["d1"]},
        "response": "Try the river paths in Lyon."
    })");
}

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& name) {
        path = std::filesystem::temp_directory_path() / name;
    }
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("sample_from_json accepts the documented record shape") {
    Sample s = sample_from_json(valid_record(), "rec");
    CHECK(s.id == "s1");
    CHECK(s.context.turns().size() == 3);
    CHECK(s.registry.size() == 2);
    CHECK(s.label_plan.ordered.size() == 2);
    CHECK(s.gold_ids(SourceId("PERSONA")) == std::set<std::string>{"p1"});
    CHECK(s.reference_response == "Try the river paths in Lyon.");
    const Evidence* d1 = s.registry.find_evidence("d1");
    REQUIRE(d1 != nullptr);
    CHECK(d1->parent == "p2");
}

TEST_CASE("sample_from_json rejects schema violations with the record location") {
    auto expect_schema_error = [](json record, const char* reason) {
        INFO(reason);
        try {
            sample_from_json(record, "file.jsonl:3");
            FAIL_CHECK("expected SchemaError for: " << reason);
        } catch (const SchemaError& e) {
            CHECK(std::string(e.what()).find("file.jsonl:3") != std::string::npos);
        }
    };

    json r = valid_record();
    r.erase("id");
    expect_schema_error(r, "missing id");

    r = valid_record();
    r["id"] = "";
    expect_schema_error(r, "empty id");

    r = valid_record();
    r["context"] = json::array();
    expect_schema_error(r, "empty context");

    r = valid_record();
    r["context"].back()["role"] = "assistant";
    expect_schema_error(r, "unknown role");

    r = valid_record();
    r["context"].push_back({{"role", "system"}, {"text", "trailing"}});
    expect_schema_error(r, "context must end on a user turn");

    r = valid_record();
    r["label_plan"] = {"DOCUMENTS"};
    expect_schema_error(r, "label plan violating dependencies");

    r = valid_record();
    r["label_plan"] = {"WIKI"};
    expect_schema_error(r, "label plan naming an unknown source");

    r = valid_record();
    r["label_evidence"]["PERSONA"] = {"d1"};
    expect_schema_error(r, "label evidence belonging to another source");

    r = valid_record();
    r["label_evidence"]["PERSONA"] = {"nope"};
    expect_schema_error(r, "label evidence id not found");

    r = valid_record();
    r["response"] = "";
    expect_schema_error(r, "empty response");
}

TEST_CASE("samples round-trip through JSON") {
    Sample s = sample_from_json(valid_record(), "rec");
    Sample back = sample_from_json(sample_to_json(s), "rec2");
    CHECK(back == s);
}

TEST_CASE("load_corpus reports file and line, rejects duplicates") {
    TempFile file("msrag_corpus_test.jsonl");
    {
        std::ofstream out(file.path);
        out << valid_record().dump() << "\n";
        out << "\n";  // blank lines are fine
        json second = valid_record();
        second["id"] = "s2";
        out << second.dump() << "\n";
    }
    std::vector<Sample> samples = load_corpus(file.path);
    CHECK(samples.size() == 2);

    {
        std::ofstream out(file.path, std::ios::app);
        out << "{broken\n";
    }
    try {
        load_corpus(file.path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find(":4") != std::string::npos);
    }

    {
        std::ofstream out(file.path);
        out << valid_record().dump() << "\n" << valid_record().dump() << "\n";
    }
    CHECK_THROWS_AS(load_corpus(file.path), SchemaError);

    {
        std::ofstream out(file.path);
        out << "\n";
    }
    CHECK_THROWS_AS(load_corpus(file.path), SchemaError);  // empty corpus
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), SchemaError);
}

TEST_CASE("save_corpus writes loadable JSONL") {
    Sample s = sample_from_json(valid_record(), "rec");
    json second = valid_record();
    second["id"] = "s2";
    Sample s2 = sample_from_json(second, "rec");

    TempFile file("msrag_corpus_save.jsonl");
    save_corpus({s, s2}, file.path);
    std::vector<Sample> back = load_corpus(file.path);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == s);
    CHECK(back[1] == s2);
}

TEST_CASE("plan signatures are sorted source names") {
    CHECK(plan_signature(Plan{}) == "NULL");
    CHECK(plan_signature(Plan{{SourceId("PERSONA")}}) == "PERSONA");
    CHECK(plan_signature(Plan{{SourceId("PERSONA"), SourceId("DOCUMENTS")}}) ==
          "DOCUMENTS+PERSONA");
    CHECK(plan_signature(Plan{{SourceId("DOCUMENTS"), SourceId("PERSONA")}}) ==
          "DOCUMENTS+PERSONA");
}

TEST_CASE("corpus stats aggregate plan classes") {
    Sample s1 = sample_from_json(valid_record(), "rec");
    json r2 = valid_record();
    r2["id"] = "s2";
    r2["label_plan"] = json::array();
    r2["label_evidence"] = json::object();
    Sample s2 = sample_from_json(r2, "rec");
    json r3 = valid_record();
    r3["id"] = "s3";
    r3["label_plan"] = {"PERSONA"};
    r3["label_evidence"] = {{"PERSONA", {"p1"}}};
    Sample s3 = sample_from_json(r3, "rec");

    CorpusStats stats = corpus_stats({s1, s2, s3});
    CHECK(stats.n_samples == 3);
    CHECK(stats.plan_histogram.at("DOCUMENTS+PERSONA") == 1);
    CHECK(stats.plan_histogram.at("NULL") == 1);
    CHECK(stats.plan_histogram.at("PERSONA") == 1);
    CHECK(stats.pct_with_source == doctest::Approx(200.0 / 3.0));

    auto j = stats.to_json();
    CHECK(j["n_samples"] == 3);
    CHECK(j["plan_histogram"]["NULL"] == 1);

    CHECK_THROWS_AS(corpus_stats({}), SchemaError);
}
