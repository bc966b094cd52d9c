#include "msrag/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <sstream>

namespace msrag {

namespace tokens {

bool is_reserved(std::string_view name) {
    return name == kSourceBegin || name == kSourceEnd || name == kEvidenceBegin ||
           name == kEvidenceEnd || name == kNull;
}

}  // namespace tokens

// ---------------------------------------------------------------------------
// SourceId

SourceId::SourceId(std::string name) : name_(std::move(name)) {
    if (name_.empty()) {
        throw SchemaError("source name must be non-empty");
    }
    if (tokens::is_reserved(name_)) {
        throw SchemaError("source name collides with reserved token: " + name_);
    }
    for (unsigned char c : name_) {
        if (c <= 0x20 || c >= 0x7f) {
            throw SchemaError("source name must be printable ASCII without whitespace: " + name_);
        }
        if (std::islower(c)) {
            throw SchemaError("source name must be uppercase: " + name_);
        }
    }
}

// ---------------------------------------------------------------------------
// RelevanceScore

RelevanceScore RelevanceScore::from_tenths(int tenths) {
    if (tenths < 0 || tenths > 10) {
        throw RangeError("relevance score out of grid: " + std::to_string(tenths) + "/10");
    }
    RelevanceScore s;
    s.tenths_ = tenths;
    return s;
}

RelevanceScore RelevanceScore::from_token(std::string_view token) {
    // Accepted forms are exactly "0.0".."0.9" and "1.0".
    if (token.size() == 3 && token[1] == '.' && std::isdigit(static_cast<unsigned char>(token[0])) &&
        std::isdigit(static_cast<unsigned char>(token[2]))) {
        int whole = token[0] - '0';
        int tenth = token[2] - '0';
        int tenths = whole * 10 + tenth;
        if (tenths <= 10) {
            return from_tenths(tenths);
        }
    }
    throw ParseError("not a similarity token: " + std::string(token), std::string(token));
}

std::string RelevanceScore::token() const {
    std::string out;
    out += static_cast<char>('0' + tenths_ / 10);
    out += '.';
    out += static_cast<char>('0' + tenths_ % 10);
    return out;
}

RelevanceScore quantize_score(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {  // also rejects NaN
        std::ostringstream msg;
        msg << "score outside [0,1]: " << x;
        throw RangeError(msg.str());
    }
    // Half-up on the tenths grid. The epsilon absorbs binary representation
    // error so decimal midpoints (0.05, 0.15, ...) land on the upper bin.
    int tenths = static_cast<int>(std::floor(x * 10.0 + 0.5 + 1e-9));
    tenths = std::min(tenths, 10);
    return RelevanceScore::from_tenths(tenths);
}

// ---------------------------------------------------------------------------
// ScorerKind

std::string_view to_string(ScorerKind kind) {
    switch (kind) {
        case ScorerKind::bm25: return "bm25";
        case ScorerKind::dense: return "dense";
        case ScorerKind::llm: return "llm";
        case ScorerKind::self_eval: return "self";
        case ScorerKind::hard: return "hard";
        case ScorerKind::oracle: return "oracle";
    }
    throw RangeError("unknown scorer kind");
}

ScorerKind scorer_kind_from_string(std::string_view s) {
    if (s == "bm25") return ScorerKind::bm25;
    if (s == "dense") return ScorerKind::dense;
    if (s == "llm") return ScorerKind::llm;
    if (s == "self") return ScorerKind::self_eval;
    if (s == "hard") return ScorerKind::hard;
    if (s == "oracle") return ScorerKind::oracle;
    throw ParseError("unknown scorer kind: " + std::string(s), std::string(s));
}

// ---------------------------------------------------------------------------
// DialogueContext

std::string_view to_string(Role role) {
    return role == Role::user ? "user" : "system";
}

Role role_from_string(std::string_view s) {
    if (s == "user") return Role::user;
    if (s == "system") return Role::system;
    throw ParseError("unknown role: " + std::string(s), std::string(s));
}

DialogueContext::DialogueContext(std::vector<Turn> turns) : turns_(std::move(turns)) {
    if (turns_.empty()) {
        throw SchemaError("dialogue context must have at least one turn");
    }
    if (turns_.back().role != Role::user) {
        throw SchemaError("dialogue context must end with a user turn");
    }
}

std::string render_context(const DialogueContext& context) {
    std::string out;
    for (const Turn& turn : context.turns()) {
        if (!out.empty()) out += '\n';
        out += (turn.role == Role::user) ? "User: " : "System: ";
        out += turn.text;
    }
    return out;
}

std::string context_query_text(const DialogueContext& context) {
    std::string out;
    for (const Turn& turn : context.turns()) {
        if (!out.empty()) out += '\n';
        out += turn.text;
    }
    return out;
}

// ---------------------------------------------------------------------------
// SourceRegistry

void SourceRegistry::add_source(const SourceId& source, std::vector<Evidence> docs,
                                std::vector<SourceId> depends_on) {
    if (docs_.count(source.name()) != 0) {
        throw SchemaError("duplicate source: " + source.name());
    }
    for (const Evidence& doc : docs) {
        if (doc.id.empty()) {
            throw SchemaError("evidence id must be non-empty in source " + source.name());
        }
        if (doc.text.empty()) {
            throw SchemaError("evidence text must be non-empty: " + doc.id);
        }
        if (!(doc.source == source)) {
            throw SchemaError("evidence " + doc.id + " tagged with a different source");
        }
        if (find_evidence(doc.id) != nullptr) {
            throw SchemaError("duplicate evidence id: " + doc.id);
        }
        // Duplicates within the batch being added.
        std::size_t seen = 0;
        for (const Evidence& other : docs) {
            if (other.id == doc.id) ++seen;
        }
        if (seen > 1) {
            throw SchemaError("duplicate evidence id: " + doc.id);
        }
    }
    order_.push_back(source);
    docs_[source.name()] = std::move(docs);
    deps_[source.name()] = std::move(depends_on);
}

bool SourceRegistry::has_source(const SourceId& source) const {
    return docs_.count(source.name()) != 0;
}

const std::vector<Evidence>& SourceRegistry::docs(const SourceId& source) const {
    auto it = docs_.find(source.name());
    if (it == docs_.end()) {
        throw SchemaError("unknown source: " + source.name());
    }
    return it->second;
}

const std::vector<SourceId>& SourceRegistry::depends_on(const SourceId& source) const {
    auto it = deps_.find(source.name());
    if (it == deps_.end()) {
        throw SchemaError("unknown source: " + source.name());
    }
    return it->second;
}

const Evidence* SourceRegistry::find_evidence(std::string_view evidence_id) const {
    for (const auto& [name, docs] : docs_) {
        for (const Evidence& doc : docs) {
            if (doc.id == evidence_id) return &doc;
        }
    }
    return nullptr;
}

void SourceRegistry::validate() const {
    for (const SourceId& source : order_) {
        for (const SourceId& dep : depends_on(source)) {
            if (!has_source(dep)) {
                throw SchemaError("source " + source.name() + " depends on unknown source " +
                                  dep.name());
            }
        }
        for (const Evidence& doc : docs(source)) {
            if (doc.parent && find_evidence(*doc.parent) == nullptr) {
                throw SchemaError("evidence " + doc.id + " links to unknown parent " + *doc.parent);
            }
        }
    }
    topological_order();  // throws on cycles
}

std::vector<SourceId> SourceRegistry::topological_order() const {
    // Kahn's algorithm; the ready queue preserves insertion order so the
    // result is deterministic for a given registry.
    std::map<std::string, std::size_t> pending;
    for (const SourceId& source : order_) {
        pending[source.name()] = depends_on(source).size();
    }
    std::vector<SourceId> out;
    std::deque<SourceId> ready;
    for (const SourceId& source : order_) {
        if (pending[source.name()] == 0) ready.push_back(source);
    }
    while (!ready.empty()) {
        SourceId next = ready.front();
        ready.pop_front();
        out.push_back(next);
        for (const SourceId& source : order_) {
            const std::vector<SourceId>& deps = depends_on(source);
            if (std::find(deps.begin(), deps.end(), next) != deps.end()) {
                if (--pending[source.name()] == 0) ready.push_back(source);
            }
        }
    }
    if (out.size() != order_.size()) {
        throw SchemaError("dependency cycle among knowledge sources");
    }
    return out;
}

bool operator==(const SourceRegistry& a, const SourceRegistry& b) {
    if (!(a.order_ == b.order_) || a.docs_ != b.docs_) return false;
    return a.deps_ == b.deps_;
}

// ---------------------------------------------------------------------------
// Plan

bool Plan::contains(const SourceId& source) const {
    return std::find(ordered.begin(), ordered.end(), source) != ordered.end();
}

std::string serialize_plan(const Plan& plan) {
    std::string out(tokens::kSourceBegin);
    if (plan.is_null()) {
        out += ' ';
        out += tokens::kNull;
    } else {
        for (const SourceId& source : plan.ordered) {
            out += ' ';
            out += source.name();
        }
    }
    out += ' ';
    out += tokens::kSourceEnd;
    return out;
}

namespace {

// Splits on whitespace and commas; the tolerant half of parse_plan.
std::vector<std::string> rough_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

ParsedPlan parse_plan(std::string_view text, const SourceRegistry& registry) {
    std::string_view region = text;
    std::size_t begin = text.find(tokens::kSourceBegin);
    if (begin != std::string_view::npos) {
        std::size_t after = begin + tokens::kSourceBegin.size();
        std::size_t end = text.find(tokens::kSourceEnd, after);
        region = (end == std::string_view::npos) ? text.substr(after)
                                                 : text.substr(after, end - after);
    }
    std::vector<std::string> raw = rough_tokens(region);

    ParsedPlan out;
    bool any_recognized = false;
    bool first_decision = true;
    std::set<std::string> seen;
    for (const std::string& token : raw) {
        if (token == tokens::kSourceBegin || token == tokens::kSourceEnd ||
            token == tokens::kEvidenceBegin || token == tokens::kEvidenceEnd) {
            continue;
        }
        if (token == tokens::kNull) {
            any_recognized = true;
            if (first_decision) {
                // NULL as the first decision wins; the plan stays empty.
                first_decision = false;
                break;
            }
            out.dropped.push_back(token);
            continue;
        }
        bool known = false;
        for (const SourceId& source : registry.sources()) {
            if (source.name() == token) {
                known = true;
                break;
            }
        }
        if (!known) {
            out.dropped.push_back(token);
            continue;
        }
        any_recognized = true;
        first_decision = false;
        if (seen.insert(token).second) {
            out.plan.ordered.emplace_back(token);
        } else {
            out.dropped.push_back(token);  // repeats keep the first occurrence
        }
    }
    if (!any_recognized) {
        throw ParseError("no plan decision recognized in model output", std::string(text));
    }
    return out;
}

std::string PlanViolation::to_string() const {
    std::string out;
    switch (kind) {
        case Kind::missing_dependency:
            out = "source " + source.name() + " requires " + dependency->name() +
                  " which is absent from the plan";
            break;
        case Kind::misordered_dependency:
            out = "source " + source.name() + " must come after its prerequisite " +
                  dependency->name();
            break;
        case Kind::duplicate_source:
            out = "source " + source.name() + " appears more than once";
            break;
        case Kind::unknown_source:
            out = "source " + source.name() + " is not in the registry";
            break;
    }
    return out;
}

std::vector<PlanViolation> validate_plan(const Plan& plan, const SourceRegistry& registry) {
    std::vector<PlanViolation> out;
    std::set<std::string> reported_duplicate;
    for (std::size_t i = 0; i < plan.ordered.size(); ++i) {
        const SourceId& source = plan.ordered[i];
        for (std::size_t j = 0; j < i; ++j) {
            if (plan.ordered[j] == source) {
                if (reported_duplicate.insert(source.name()).second) {
                    out.push_back({PlanViolation::Kind::duplicate_source, source, std::nullopt});
                }
                break;
            }
        }
        if (!registry.has_source(source)) {
            out.push_back({PlanViolation::Kind::unknown_source, source, std::nullopt});
            continue;
        }
        for (const SourceId& dep : registry.depends_on(source)) {
            // The first occurrence of the dependency must precede the first
            // occurrence of the dependent.
            std::size_t dep_pos = plan.ordered.size();
            for (std::size_t j = 0; j < plan.ordered.size(); ++j) {
                if (plan.ordered[j] == dep) {
                    dep_pos = j;
                    break;
                }
            }
            std::size_t self_pos = i;
            for (std::size_t j = 0; j < i; ++j) {
                if (plan.ordered[j] == source) {
                    self_pos = j;
                    break;
                }
            }
            if (self_pos != i) continue;  // only report once, at the first occurrence
            if (dep_pos == plan.ordered.size()) {
                out.push_back({PlanViolation::Kind::missing_dependency, source, dep});
            } else if (dep_pos > self_pos) {
                out.push_back({PlanViolation::Kind::misordered_dependency, source, dep});
            }
        }
    }
    return out;
}

}  // namespace msrag
