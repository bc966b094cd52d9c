#pragma once
// Post-hoc evidence refinement: score each used evidence against the drafted
// response (entailment) and the dialogue (similarity), evict the weakest
// items, retrieve novel same-source replacements, and regenerate. Repeats for
// a configured number of passes with early stop when nothing is evicted.

#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "msrag/core.hpp"
#include "msrag/providers.hpp"

namespace msrag {

// ---------------------------------------------------------------------------
// Scoring

struct CombinedScores {
    std::vector<double> nli;       // how far each evidence entails the response
    std::vector<double> ce;        // the evidence's own evaluation-token value
    std::vector<double> combined;  // elementwise product
};

// nli[i] = entail(evidence_i text, response); ce[i] = evidences[i].score;
// combined[i] = nli[i] * ce[i]. Throws RangeError on an empty evidence list.
CombinedScores combined_scores(const std::vector<ScoredEvidence>& evidences,
                               const std::string& response, NliProvider& nli);

// Indices of the alpha smallest combined scores (ties break toward the
// smaller index), ascending by score. alpha clamps to the list size; the
// clamp is reported in the pass trace. Throws RangeError on alpha < 1 or an
// empty score list.
std::vector<std::size_t> select_updates(const std::vector<double>& combined, int alpha);

// ---------------------------------------------------------------------------
// Refinement

// Produces the full same-source ranking used to pick replacements. The
// pipeline wires this to chained retrieval; tests substitute stubs.
using EvidenceRanker =
    std::function<std::vector<ScoredEvidence>(const DialogueContext&, const SourceId&)>;

struct RefinementConfig {
    int alpha = 1;
    int steps = 1;
    bool skip_on_null = true;  // leave NULL-decision samples untouched
    GenParams gen;
};

struct PassTrace {
    std::vector<double> nli;
    std::vector<double> ce;
    std::vector<double> combined;
    std::vector<std::string> evicted_ids;
    std::vector<std::string> injected_ids;
    // Sources whose pools had no novel candidate left; the original evidence
    // stayed in place.
    std::vector<std::string> exhausted_sources;
    bool alpha_clamped = false;
    std::string response;  // the regenerated response after this pass

    nlohmann::ordered_json to_json() const;
};

struct RefineOutcome {
    std::vector<ScoredEvidence> evidences;
    std::string response;
    PassTrace trace;
};

// One refinement pass. `history` is the set of evidence ids already used in
// any earlier pass (including the current evidence); replacements must be
// novel against it and are added to it. An empty plan or empty evidence list
// returns the inputs unchanged with an empty trace. Throws ChainError when an
// evicted item's source is missing from the ranker's output entirely.
RefineOutcome refine_once(const DialogueContext& context, const Plan& plan,
                          const std::vector<ScoredEvidence>& evidences,
                          const std::string& response, ChatProvider& chat, NliProvider& nli,
                          const EvidenceRanker& ranker, const RefinementConfig& config,
                          std::set<std::string>& history);

struct MultiOutcome {
    std::vector<ScoredEvidence> evidences;
    std::string response;
    std::vector<PassTrace> traces;  // one per executed pass
};

// Runs up to config.steps passes, stopping early when a pass evicts nothing
// (every slot exhausted or the evidence list is empty).
MultiOutcome refine_multi(const DialogueContext& context, const Plan& plan,
                          std::vector<ScoredEvidence> evidences, std::string response,
                          ChatProvider& chat, NliProvider& nli, const EvidenceRanker& ranker,
                          const RefinementConfig& config);

}  // namespace msrag
