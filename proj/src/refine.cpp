#include "msrag/refine.hpp"

#include <algorithm>
#include <numeric>

#include "msrag/reader.hpp"

namespace msrag {

CombinedScores combined_scores(const std::vector<ScoredEvidence>& evidences,
                               const std::string& response, NliProvider& nli) {
    if (evidences.empty()) {
        throw RangeError("cannot score an empty evidence list");
    }
    CombinedScores out;
    out.nli.reserve(evidences.size());
    out.ce.reserve(evidences.size());
    out.combined.reserve(evidences.size());
    for (const ScoredEvidence& item : evidences) {
        double entail = nli.entail(item.evidence.text, response);
        out.nli.push_back(entail);
        out.ce.push_back(item.score.value());
        out.combined.push_back(entail * item.score.value());
    }
    return out;
}

std::vector<std::size_t> select_updates(const std::vector<double>& combined, int alpha) {
    if (alpha < 1) throw RangeError("alpha must be >= 1");
    if (combined.empty()) throw RangeError("cannot select updates from an empty score list");
    std::vector<std::size_t> order(combined.size());
    std::iota(order.begin(), order.end(), 0);
    // stable_sort keeps index order on ties, so equal scores evict the
    // earlier slot first.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return combined[a] < combined[b]; });
    std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(alpha), combined.size());
    order.resize(keep);
    return order;
}

nlohmann::ordered_json PassTrace::to_json() const {
    nlohmann::ordered_json out;
    out["nli"] = nli;
    out["ce"] = ce;
    out["combined"] = combined;
    out["evicted"] = evicted_ids;
    out["injected"] = injected_ids;
    out["exhausted"] = exhausted_sources;
    out["alpha_clamped"] = alpha_clamped;
    out["response"] = response;
    return out;
}

RefineOutcome refine_once(const DialogueContext& context, const Plan& plan,
                          const std::vector<ScoredEvidence>& evidences,
                          const std::string& response, ChatProvider& chat, NliProvider& nli,
                          const EvidenceRanker& ranker, const RefinementConfig& config,
                          std::set<std::string>& history) {
    RefineOutcome out;
    out.evidences = evidences;
    out.response = response;
    out.trace.response = response;
    if ((plan.is_null() && config.skip_on_null) || evidences.empty()) {
        return out;  // nothing to refine; the caller's early stop sees no evictions
    }

    CombinedScores scores = combined_scores(evidences, response, nli);
    out.trace.nli = scores.nli;
    out.trace.ce = scores.ce;
    out.trace.combined = scores.combined;
    out.trace.alpha_clamped = static_cast<std::size_t>(config.alpha) > evidences.size();

    std::vector<std::size_t> updates = select_updates(scores.combined, config.alpha);
    for (std::size_t slot : updates) {
        const SourceId& source = out.evidences[slot].evidence.source;
        std::vector<ScoredEvidence> ranking = ranker(context, source);
        if (ranking.empty()) {
            throw ChainError("refinement ranker produced no candidates for source " +
                             source.name());
        }
        const ScoredEvidence* replacement = nullptr;
        for (const ScoredEvidence& candidate : ranking) {
            if (history.count(candidate.evidence.id) == 0) {
                replacement = &candidate;
                break;
            }
        }
        if (replacement == nullptr) {
            // Pool exhausted for this source: keep the original in place.
            out.trace.exhausted_sources.push_back(source.name());
            continue;
        }
        out.trace.evicted_ids.push_back(out.evidences[slot].evidence.id);
        out.trace.injected_ids.push_back(replacement->evidence.id);
        history.insert(replacement->evidence.id);
        out.evidences[slot] = *replacement;
    }

    if (!out.trace.evicted_ids.empty()) {
        AssembledPrompt prompt = assemble_input(context, plan, out.evidences);
        out.response = generate_response(prompt, chat, config.gen);
        out.trace.response = out.response;
    }
    return out;
}

MultiOutcome refine_multi(const DialogueContext& context, const Plan& plan,
                          std::vector<ScoredEvidence> evidences, std::string response,
                          ChatProvider& chat, NliProvider& nli, const EvidenceRanker& ranker,
                          const RefinementConfig& config) {
    if (config.steps < 1) throw RangeError("steps must be >= 1");
    std::set<std::string> history;
    for (const ScoredEvidence& item : evidences) history.insert(item.evidence.id);

    MultiOutcome out;
    out.evidences = std::move(evidences);
    out.response = std::move(response);
    for (int step = 0; step < config.steps; ++step) {
        RefineOutcome pass = refine_once(context, plan, out.evidences, out.response, chat, nli,
                                         ranker, config, history);
        out.traces.push_back(pass.trace);
        bool progressed = !pass.trace.evicted_ids.empty();
        out.evidences = std::move(pass.evidences);
        out.response = std::move(pass.response);
        if (!progressed) break;  // nothing evicted: a further pass would repeat
    }
    return out;
}

}  // namespace msrag
