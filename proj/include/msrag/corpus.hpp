#pragma once
// Dialogue corpus: JSONL samples pairing a dialogue context with per-source
// document pools, gold plans, gold evidence, and a reference response.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "msrag/core.hpp"

namespace msrag {

struct Sample {
    std::string id;
    DialogueContext context;
    SourceRegistry registry;
    Plan label_plan;                                        // empty == gold NULL
    std::map<std::string, std::vector<std::string>> label_evidence;  // source name -> evidence ids
    std::string reference_response;

    // Gold evidence ids of one source as a set (empty when unlabeled).
    std::set<std::string> gold_ids(const SourceId& source) const;

    friend bool operator==(const Sample& a, const Sample& b);
};

// Parses one corpus record. `where` names the record in error messages
// (file:line). Throws SchemaError on any contract breach: missing fields,
// bad roles, dangling plan sources, dangling evidence ids, dependency
// violations in the gold plan.
Sample sample_from_json(const nlohmann::json& record, const std::string& where);

nlohmann::ordered_json sample_to_json(const Sample& sample);

// Loads a JSONL corpus (one record per line, blank lines ignored). Throws
// SchemaError naming file and line on the first invalid record, and on an
// empty corpus.
std::vector<Sample> load_corpus(const std::filesystem::path& path);

void save_corpus(const std::vector<Sample>& samples, const std::filesystem::path& path);

struct CorpusStats {
    std::size_t n_samples = 0;
    // Canonical plan signature ("NULL", "PERSONA", "DOCUMENTS+PERSONA", ...)
    // to sample count. Signatures sort member names so order variants of the
    // same source set share one bucket.
    std::map<std::string, std::size_t> plan_histogram;
    double pct_with_source = 0.0;  // percentage of samples with a non-empty gold plan

    nlohmann::ordered_json to_json() const;
};

// Order-insensitive summary of gold plan decisions. Throws SchemaError on an
// empty sample list.
CorpusStats corpus_stats(const std::vector<Sample>& samples);

// Sorted source names joined with '+'; "NULL" for the empty plan.
std::string plan_signature(const Plan& plan);

}  // namespace msrag
