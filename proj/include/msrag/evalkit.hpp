#pragma once
// Evaluation toolkit: tokenization, per-class planning F1, Recall@k plumbing,
// BLEU-1, Rouge-L, and the NLI-based consistency rate, plus the aggregate
// report structure the pipeline serializes.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msrag/core.hpp"
#include "msrag/providers.hpp"

namespace msrag {

// ---------------------------------------------------------------------------
// Tokenization

enum class TokenizeMode {
    whitespace,  // split on ASCII whitespace only
    char_cjk,    // whitespace split, then CJK runs break into single characters
};

// Deterministic tokenizer used by BLEU, Rouge, BM25, and the overlap mock.
// char_cjk treats each CJK codepoint as its own token so Chinese text gets
// character-level n-grams while Latin words stay whole.
std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode);

// ---------------------------------------------------------------------------
// Plan classification

// Maps canonical plan signatures (see plan_signature) to display classes for
// per-class metrics, e.g. {"DOCUMENTS+PERSONA": "BOTH"}. Unmapped signatures
// fall back to themselves, so the default scheme is the identity.
struct ClassScheme {
    std::map<std::string, std::string> classes;

    std::string classify_signature(const std::string& signature) const;
    std::string classify(const Plan& plan) const;
};

// ---------------------------------------------------------------------------
// Per-class F1

struct F1Stats {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t support = 0;  // gold count for this class
};

// Treats each (pred, gold) plan pair as one classification decision over plan
// classes. Classes with zero true positives get precision = recall = f1 = 0.
// The result covers every class seen in either predictions or gold. Throws
// RangeError on length mismatch or empty input.
std::map<std::string, F1Stats> f1_per_class(const std::vector<Plan>& predicted,
                                            const std::vector<Plan>& gold,
                                            const ClassScheme& scheme = {});

// ---------------------------------------------------------------------------
// Generation metrics (sentence level)

// Clipped unigram precision times brevity penalty exp(min(0, 1 - |ref|/|cand|)).
// Empty candidate scores 0; throws RangeError on an empty reference.
double bleu1(const std::string& candidate, const std::string& reference,
             TokenizeMode mode = TokenizeMode::char_cjk);

// LCS F-measure (beta = 1): 2*P*R/(P+R) with P = LCS/|cand|, R = LCS/|ref|.
// Empty candidate scores 0; throws RangeError on an empty reference.
double rouge_l(const std::string& candidate, const std::string& reference,
               TokenizeMode mode = TokenizeMode::char_cjk);

// ---------------------------------------------------------------------------
// Consistency rate

struct ConsistencyResult {
    double percentage = 0.0;  // 100 * consistent / pairs
    std::size_t n_pairs = 0;
    std::size_t n_consistent = 0;
};

// Fraction of (grounding text, response) pairs the NLI provider scores at or
// above the threshold, as a percentage. Throws RangeError on empty input.
ConsistencyResult consistency_rate(
    const std::vector<std::pair<std::string, std::string>>& premise_hypothesis_pairs,
    NliProvider& nli, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Aggregate report

struct EvalReport {
    std::size_t n_samples = 0;
    std::map<std::string, F1Stats> planning_f1;           // per plan class
    std::map<std::string, double> recall_at_k;            // group label -> recall
    std::map<std::string, std::size_t> recall_evaluated;  // group label -> query count
    std::size_t recall_skipped = 0;
    int recall_k = 1;
    double bleu1_macro = 0.0;
    double rouge_l_macro = 0.0;
    // "sentence-macro": sentence-level metrics averaged over samples.
    std::string generation_metric_level = "sentence-macro";
    std::optional<double> persona_consistency;    // percentage
    std::optional<double> knowledge_consistency;  // percentage

    nlohmann::ordered_json to_json() const;
};

}  // namespace msrag
