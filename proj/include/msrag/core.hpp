#pragma once
// Core domain types shared by every module: knowledge sources, dialogue
// context, evidence, the special-token vocabulary, quantized relevance
// scores, and plan serialization/parsing/validation.
//
// All types here are immutable after construction and safe to share across
// threads; the free functions are pure.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msrag {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Parse failures keep the offending raw text for diagnostics.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::string raw_text)
        : Error(message), raw(std::move(raw_text)) {}
    std::string raw;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

// Provider failures distinguish transient (retryable) from fatal.
class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& message, bool transient_failure = false)
        : Error(message), transient(transient_failure) {}
    bool transient;
};

class ChainError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Special-token vocabulary (exact wire strings)

namespace tokens {
inline constexpr std::string_view kSourceBegin = "[SOURCE]";
inline constexpr std::string_view kSourceEnd = "[EOS]";
inline constexpr std::string_view kEvidenceBegin = "[EVIDENCE]";
inline constexpr std::string_view kEvidenceEnd = "[EOE]";
inline constexpr std::string_view kNull = "NULL";

bool is_reserved(std::string_view name);
}  // namespace tokens

// ---------------------------------------------------------------------------
// SourceId: the name of one knowledge source

class SourceId {
public:
    // Throws SchemaError unless the name is a non-empty uppercase token
    // (printable ASCII, no whitespace, no lowercase) distinct from the
    // reserved vocabulary.
    explicit SourceId(std::string name);

    const std::string& name() const { return name_; }

    friend bool operator==(const SourceId& a, const SourceId& b) { return a.name_ == b.name_; }
    friend bool operator!=(const SourceId& a, const SourceId& b) { return a.name_ != b.name_; }
    friend bool operator<(const SourceId& a, const SourceId& b) { return a.name_ < b.name_; }

private:
    std::string name_;
};

// ---------------------------------------------------------------------------
// Evidence: one document from one source

struct Evidence {
    std::string id;      // registry-unique, stable across runs
    SourceId source;
    std::string text;    // non-empty
    std::optional<std::string> parent;  // optional link to a prerequisite-source evidence id

    friend bool operator==(const Evidence& a, const Evidence& b) {
        return a.id == b.id && a.source == b.source && a.text == b.text && a.parent == b.parent;
    }
};

// ---------------------------------------------------------------------------
// RelevanceScore: a value on the 11-bin grid {0.0, 0.1, ..., 1.0}
//
// Stored as tenths so grid membership is exact by construction.

class RelevanceScore {
public:
    RelevanceScore() : tenths_(0) {}

    static RelevanceScore from_tenths(int tenths);
    // Parses a similarity token like "0.7"; throws ParseError otherwise.
    static RelevanceScore from_token(std::string_view token);

    int tenths() const { return tenths_; }
    double value() const { return tenths_ / 10.0; }
    // Renders the similarity token ("0.0".."1.0", one decimal digit).
    std::string token() const;

    friend bool operator==(RelevanceScore a, RelevanceScore b) { return a.tenths_ == b.tenths_; }
    friend bool operator!=(RelevanceScore a, RelevanceScore b) { return a.tenths_ != b.tenths_; }
    friend bool operator<(RelevanceScore a, RelevanceScore b) { return a.tenths_ < b.tenths_; }

private:
    int tenths_;
};

// Nearest grid value with half-up ties. Throws RangeError outside [0,1].
RelevanceScore quantize_score(double x);

// ---------------------------------------------------------------------------
// Scorer provenance

enum class ScorerKind { bm25, dense, llm, self_eval, hard, oracle };

std::string_view to_string(ScorerKind kind);
ScorerKind scorer_kind_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// ScoredEvidence: a retrieved document plus its evaluation-token value

struct ScoredEvidence {
    Evidence evidence;
    RelevanceScore score;
    ScorerKind scorer = ScorerKind::bm25;

    friend bool operator==(const ScoredEvidence& a, const ScoredEvidence& b) {
        return a.evidence == b.evidence && a.score == b.score && a.scorer == b.scorer;
    }
};

// ---------------------------------------------------------------------------
// DialogueContext: the turns of the current conversation

enum class Role { user, system };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct Turn {
    Role role;
    std::string text;

    friend bool operator==(const Turn& a, const Turn& b) {
        return a.role == b.role && a.text == b.text;
    }
};

class DialogueContext {
public:
    DialogueContext() = default;
    // Throws SchemaError unless turns are non-empty and the last turn is the
    // user's. Consecutive same-role turns are allowed.
    explicit DialogueContext(std::vector<Turn> turns);

    const std::vector<Turn>& turns() const { return turns_; }
    const Turn& last_user_turn() const { return turns_.back(); }

    friend bool operator==(const DialogueContext& a, const DialogueContext& b) {
        return a.turns_ == b.turns_;
    }

private:
    std::vector<Turn> turns_;
};

// Renders turns as "User: ...\nSystem: ..." lines (prompt-facing form).
std::string render_context(const DialogueContext& context);

// Plain turn texts joined by newlines (retrieval-query form, no role prefixes).
std::string context_query_text(const DialogueContext& context);

// ---------------------------------------------------------------------------
// SourceRegistry: the set K of sources, their documents, and dependency edges

class SourceRegistry {
public:
    // Adds one source with its document pool and declared prerequisites.
    // Throws SchemaError on duplicate source names or duplicate evidence ids.
    // Dependency targets and acyclicity are checked by validate().
    void add_source(const SourceId& source, std::vector<Evidence> docs,
                    std::vector<SourceId> depends_on = {});

    bool empty() const { return order_.empty(); }
    std::size_t size() const { return order_.size(); }

    // Sources in insertion order (deterministic iteration).
    const std::vector<SourceId>& sources() const { return order_; }
    bool has_source(const SourceId& source) const;

    const std::vector<Evidence>& docs(const SourceId& source) const;
    const std::vector<SourceId>& depends_on(const SourceId& source) const;

    // Looks an evidence id up across all sources.
    const Evidence* find_evidence(std::string_view evidence_id) const;

    // Checks dangling dependency targets, dangling parent links, and cycles.
    void validate() const;

    // A deterministic topological order of all sources (prerequisites first,
    // insertion order breaking ties). Throws SchemaError on cyclic graphs.
    std::vector<SourceId> topological_order() const;

    friend bool operator==(const SourceRegistry& a, const SourceRegistry& b);

private:
    std::vector<SourceId> order_;
    std::map<std::string, std::vector<Evidence>> docs_;
    std::map<std::string, std::vector<SourceId>> deps_;
};

// ---------------------------------------------------------------------------
// Plan: ordered source decisions; empty == the NULL decision

struct Plan {
    std::vector<SourceId> ordered;

    bool is_null() const { return ordered.empty(); }
    std::size_t size() const { return ordered.size(); }
    bool contains(const SourceId& source) const;

    friend bool operator==(const Plan& a, const Plan& b) { return a.ordered == b.ordered; }
};

// "[SOURCE] K_1 ... K_n [EOS]", or "[SOURCE] NULL [EOS]" for the empty plan.
std::string serialize_plan(const Plan& plan);

struct ParsedPlan {
    Plan plan;
    // Tokens that matched no registry source and were dropped.
    std::vector<std::string> dropped;
};

// Tolerant inverse of serialize_plan for noisy model output: takes the tokens
// between the first [SOURCE] and the next [EOS] when present (otherwise the
// whole string, split on whitespace and commas), treats a leading NULL as the
// empty plan, collapses duplicates keeping the first occurrence, and drops
// unknown tokens. Throws ParseError when nothing recognizable remains.
ParsedPlan parse_plan(std::string_view text, const SourceRegistry& registry);

struct PlanViolation {
    enum class Kind { missing_dependency, misordered_dependency, duplicate_source, unknown_source };
    Kind kind;
    SourceId source;
    std::optional<SourceId> dependency;

    std::string to_string() const;
};

// Every invariant breach in the plan: unknown sources, duplicates, and
// registry dependencies that are absent from or misordered in the plan.
std::vector<PlanViolation> validate_plan(const Plan& plan, const SourceRegistry& registry);

inline bool plan_is_valid(const Plan& plan, const SourceRegistry& registry) {
    return validate_plan(plan, registry).empty();
}

}  // namespace msrag
