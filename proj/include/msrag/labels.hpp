#pragma once
// Similarity supervision labels: a resumable on-disk cache of per-evidence
// relevance scores (LLM-judged, dense, or gold-derived) and the in-batch
// contrastive NLL loss those labels feed during reader training.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msrag/core.hpp"
#include "msrag/corpus.hpp"
#include "msrag/providers.hpp"
#include "msrag/retrieval.hpp"

namespace msrag {

// ---------------------------------------------------------------------------
// Label cache

struct LabelCacheEntry {
    std::string sample_id;
    std::string evidence_id;
    RelevanceScore score;
    ScorerKind scorer = ScorerKind::llm;  // llm | dense | hard
    std::string model;                    // provider model name, "" for hard
    std::string timestamp;                // RFC 3339 UTC

    friend bool operator==(const LabelCacheEntry& a, const LabelCacheEntry& b) {
        return a.sample_id == b.sample_id && a.evidence_id == b.evidence_id &&
               a.score == b.score && a.scorer == b.scorer && a.model == b.model &&
               a.timestamp == b.timestamp;
    }
};

// Append-only JSONL cache keyed by (sample id, evidence id, scorer). Reloading
// keeps the last entry per key, so rewrites win without compaction.
class LabelCache {
public:
    LabelCache() = default;

    // Loads every entry from the file when it exists; a missing file is an
    // empty cache. Throws SchemaError on malformed lines.
    static LabelCache load(const std::filesystem::path& path);

    // Inserts in memory and appends to `path` when given.
    void put(const LabelCacheEntry& entry,
             const std::optional<std::filesystem::path>& path = std::nullopt);

    const LabelCacheEntry* lookup(const std::string& sample_id, const std::string& evidence_id,
                                  ScorerKind scorer) const;

    std::size_t size() const { return entries_.size(); }

    // Entries in key order (deterministic iteration).
    std::vector<LabelCacheEntry> entries() const;

private:
    // key: sample_id \x1f evidence_id \x1f scorer
    std::map<std::string, LabelCacheEntry> entries_;
};

std::string rfc3339_utc_now();

// ---------------------------------------------------------------------------
// Precompute

struct LabelConfig {
    ScorerKind scorer = ScorerKind::llm;  // llm | dense | hard
    std::string model;                    // recorded in cache entries
    std::string relevance_template;       // llm scorer prompt, empty = default
};

struct PrecomputeSummary {
    std::size_t n_new = 0;
    std::size_t n_cached = 0;
    std::size_t n_failed = 0;
    std::vector<std::string> failures;  // "sample_id/evidence_id: reason"
};

// Scores every (sample, evidence) pair missing from the cache and appends the
// results to cache_path. Pairs already cached are skipped without touching
// any provider; failures are recorded and skipped, never fatal. hard scoring
// marks the sample's gold evidence 1.0 and everything else 0.0.
PrecomputeSummary precompute_labels(const std::vector<Sample>& samples, const LabelConfig& config,
                                    const ProviderHandles& providers, LabelCache& cache,
                                    const std::filesystem::path& cache_path);

// ---------------------------------------------------------------------------
// Contrastive loss

struct ContrastiveBatch {
    double positive = 0.0;
    std::vector<double> negatives;
    // True when the batch held no in-batch negative and one was drawn from
    // another sample instead.
    bool substitute_injected = false;
};

// In-batch NLL: -ln(exp(s+) / (exp(s+) + sum_j exp(s-_j))), computed via a
// stable log-sum-exp. Throws RangeError on empty negatives or non-finite
// logits.
double nll_loss(const ContrastiveBatch& batch);

// Builds an in-batch contrastive batch: the gold document's score is the
// positive, every other scored document a negative. When no in-batch
// negative exists (single-document batch), the first of
// `fallback_negatives` (scores drawn from other samples) is injected and
// flagged. Throws RangeError when the gold id is absent from `scored` or no
// negative can be found at all.
ContrastiveBatch build_batch(const std::vector<ScoredEvidence>& scored, const std::string& gold_id,
                             const std::vector<double>& fallback_negatives = {});

}  // namespace msrag
