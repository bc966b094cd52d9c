#include "msrag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace msrag {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw SchemaError(where + ": " + what);
}

const json& require_field(const json& record, const char* key, const std::string& where) {
    auto it = record.find(key);
    if (it == record.end()) {
        fail(where, std::string("missing field \"") + key + "\"");
    }
    return *it;
}

std::string require_string(const json& value, const char* key, const std::string& where) {
    if (!value.is_string()) {
        fail(where, std::string("field \"") + key + "\" must be a string");
    }
    return value.get<std::string>();
}

}  // namespace

std::set<std::string> Sample::gold_ids(const SourceId& source) const {
    auto it = label_evidence.find(source.name());
    if (it == label_evidence.end()) return {};
    return {it->second.begin(), it->second.end()};
}

bool operator==(const Sample& a, const Sample& b) {
    return a.id == b.id && a.context == b.context && a.registry == b.registry &&
           a.label_plan == b.label_plan && a.label_evidence == b.label_evidence &&
           a.reference_response == b.reference_response;
}

Sample sample_from_json(const json& record, const std::string& where) {
    if (!record.is_object()) fail(where, "record must be a JSON object");

    Sample sample;
    sample.id = require_string(require_field(record, "id", where), "id", where);
    if (sample.id.empty()) fail(where, "id must be non-empty");

    // context
    const json& context = require_field(record, "context", where);
    if (!context.is_array() || context.empty()) {
        fail(where, "context must be a non-empty array of turns");
    }
    std::vector<Turn> turns;
    for (const json& turn : context) {
        if (!turn.is_object()) fail(where, "context turn must be an object");
        std::string role = require_string(require_field(turn, "role", where), "role", where);
        std::string text = require_string(require_field(turn, "text", where), "text", where);
        if (text.empty()) fail(where, "turn text must be non-empty");
        Role parsed;
        try {
            parsed = role_from_string(role);
        } catch (const ParseError&) {
            fail(where, "turn role must be \"user\" or \"system\", got \"" + role + "\"");
        }
        turns.push_back({parsed, std::move(text)});
    }
    try {
        sample.context = DialogueContext(std::move(turns));
    } catch (const SchemaError& e) {
        fail(where, e.what());
    }

    // sources
    const json& sources = require_field(record, "sources", where);
    if (!sources.is_object()) fail(where, "sources must be an object");
    try {
        for (auto it = sources.begin(); it != sources.end(); ++it) {
            SourceId source(it.key());
            const json& body = it.value();
            if (!body.is_object()) fail(where, "source body must be an object");
            std::vector<SourceId> deps;
            if (body.contains("depends_on")) {
                for (const json& dep : body.at("depends_on")) {
                    deps.emplace_back(require_string(dep, "depends_on", where));
                }
            }
            std::vector<Evidence> docs;
            const json& doc_list = require_field(body, "docs", where);
            if (!doc_list.is_array()) fail(where, "docs must be an array");
            for (const json& doc : doc_list) {
                Evidence ev{require_string(require_field(doc, "id", where), "id", where), source,
                            require_string(require_field(doc, "text", where), "text", where),
                            std::nullopt};
                if (doc.contains("parent")) {
                    ev.parent = require_string(doc.at("parent"), "parent", where);
                }
                docs.push_back(std::move(ev));
            }
            sample.registry.add_source(source, std::move(docs), std::move(deps));
        }
        sample.registry.validate();
    } catch (const SchemaError& e) {
        std::string what = e.what();
        if (what.rfind(where, 0) == 0) throw;  // already prefixed
        fail(where, what);
    }

    // label_plan
    const json& plan = require_field(record, "label_plan", where);
    if (!plan.is_array()) fail(where, "label_plan must be an array of source names");
    try {
        for (const json& name : plan) {
            sample.label_plan.ordered.emplace_back(require_string(name, "label_plan", where));
        }
    } catch (const SchemaError& e) {
        fail(where, e.what());
    }
    std::vector<PlanViolation> violations = validate_plan(sample.label_plan, sample.registry);
    if (!violations.empty()) {
        fail(where, "label_plan invalid: " + violations.front().to_string());
    }

    // label_evidence
    const json& evidence = require_field(record, "label_evidence", where);
    if (!evidence.is_object()) fail(where, "label_evidence must be an object");
    for (auto it = evidence.begin(); it != evidence.end(); ++it) {
        SourceId source = [&]() -> SourceId {
            try {
                return SourceId(it.key());
            } catch (const SchemaError& e) {
                fail(where, e.what());
            }
        }();
        if (!sample.registry.has_source(source)) {
            fail(where, "label_evidence names unknown source " + source.name());
        }
        std::vector<std::string> ids;
        if (!it.value().is_array()) fail(where, "label_evidence values must be arrays");
        for (const json& id : it.value()) {
            std::string evidence_id = require_string(id, "label_evidence", where);
            const Evidence* found = sample.registry.find_evidence(evidence_id);
            if (found == nullptr) {
                fail(where, "label_evidence id \"" + evidence_id + "\" not found in any source");
            }
            if (!(found->source == source)) {
                fail(where, "label_evidence id \"" + evidence_id + "\" belongs to source " +
                                found->source.name() + ", not " + source.name());
            }
            ids.push_back(std::move(evidence_id));
        }
        sample.label_evidence[source.name()] = std::move(ids);
    }

    sample.reference_response =
        require_string(require_field(record, "response", where), "response", where);
    if (sample.reference_response.empty()) fail(where, "response must be non-empty");
    return sample;
}

ordered_json sample_to_json(const Sample& sample) {
    ordered_json record;
    record["id"] = sample.id;
    record["context"] = ordered_json::array();
    for (const Turn& turn : sample.context.turns()) {
        record["context"].push_back({{"role", std::string(to_string(turn.role))},
                                     {"text", turn.text}});
    }
    ordered_json sources = ordered_json::object();
    for (const SourceId& source : sample.registry.sources()) {
        ordered_json body = ordered_json::object();
        const std::vector<SourceId>& deps = sample.registry.depends_on(source);
        if (!deps.empty()) {
            ordered_json dep_names = ordered_json::array();
            for (const SourceId& dep : deps) dep_names.push_back(dep.name());
            body["depends_on"] = std::move(dep_names);
        }
        ordered_json docs = ordered_json::array();
        for (const Evidence& doc : sample.registry.docs(source)) {
            ordered_json entry = {{"id", doc.id}, {"text", doc.text}};
            if (doc.parent) entry["parent"] = *doc.parent;
            docs.push_back(std::move(entry));
        }
        body["docs"] = std::move(docs);
        sources[source.name()] = std::move(body);
    }
    record["sources"] = std::move(sources);
    ordered_json plan = ordered_json::array();
    for (const SourceId& source : sample.label_plan.ordered) plan.push_back(source.name());
    record["label_plan"] = std::move(plan);
    record["label_evidence"] = ordered_json::object();
    for (const auto& [source, ids] : sample.label_evidence) {
        record["label_evidence"][source] = ids;
    }
    record["response"] = sample.reference_response;
    return record;
}

std::vector<Sample> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open corpus file: " + path.string());
    }
    std::vector<Sample> samples;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string where = path.filename().string() + ":" + std::to_string(line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError(where + ": invalid JSON: " + e.what());
        }
        Sample sample = sample_from_json(record, where);
        if (!seen_ids.insert(sample.id).second) {
            throw SchemaError(where + ": duplicate sample id \"" + sample.id + "\"");
        }
        samples.push_back(std::move(sample));
    }
    if (samples.empty()) {
        throw SchemaError("corpus is empty: " + path.string());
    }
    return samples;
}

void save_corpus(const std::vector<Sample>& samples, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw SchemaError("cannot write corpus file: " + path.string());
    }
    for (const Sample& sample : samples) {
        out << sample_to_json(sample).dump() << '\n';
    }
}

std::string plan_signature(const Plan& plan) {
    if (plan.is_null()) return std::string(tokens::kNull);
    std::vector<std::string> names;
    names.reserve(plan.ordered.size());
    for (const SourceId& source : plan.ordered) names.push_back(source.name());
    std::sort(names.begin(), names.end());
    std::string out;
    for (const std::string& name : names) {
        if (!out.empty()) out += '+';
        out += name;
    }
    return out;
}

CorpusStats corpus_stats(const std::vector<Sample>& samples) {
    if (samples.empty()) {
        throw SchemaError("cannot compute stats of an empty corpus");
    }
    CorpusStats stats;
    stats.n_samples = samples.size();
    std::size_t with_source = 0;
    for (const Sample& sample : samples) {
        ++stats.plan_histogram[plan_signature(sample.label_plan)];
        if (!sample.label_plan.is_null()) ++with_source;
    }
    stats.pct_with_source = 100.0 * static_cast<double>(with_source) /
                            static_cast<double>(samples.size());
    return stats;
}

nlohmann::ordered_json CorpusStats::to_json() const {
    ordered_json out;
    out["n_samples"] = n_samples;
    out["plan_histogram"] = ordered_json::object();
    for (const auto& [signature, count] : plan_histogram) {
        out["plan_histogram"][signature] = count;
    }
    out["pct_with_source"] = pct_with_source;
    return out;
}

}  // namespace msrag
