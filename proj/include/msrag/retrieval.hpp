#pragma once
// Evidence retrieval: sparse (Okapi BM25), dense (embedding cosine), and
// LLM-prompted relevance scoring, plus top-k selection and dependency-aware
// chained retrieval across the sources of a plan.

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "msrag/core.hpp"
#include "msrag/providers.hpp"

namespace msrag {

// ---------------------------------------------------------------------------
// Tokenization hook (defaults to the evalkit whitespace+CJK tokenizer)

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

Tokenizer default_tokenizer();

// ---------------------------------------------------------------------------
// Okapi BM25

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

class Bm25Index {
public:
    // Builds term statistics over the documents. Throws RangeError on an
    // empty document list.
    Bm25Index(const std::vector<Evidence>& docs, Tokenizer tokenizer = default_tokenizer(),
              Bm25Params params = {});

    // Scores every indexed document against the query, in index order.
    // Documents sharing no query term score exactly 0.
    std::vector<double> score(const std::string& query) const;

    // idf(term) = ln(1 + (N - df + 0.5) / (df + 0.5)). Terms absent from the
    // index never contribute to score() since their tf is 0 everywhere.
    double idf(const std::string& term) const;

    std::size_t doc_count() const { return doc_lengths_.size(); }
    double avg_doc_length() const { return avg_length_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const Bm25Params& params() const { return params_; }

private:
    Bm25Params params_;
    Tokenizer tokenizer_;
    std::vector<std::string> doc_ids_;
    std::vector<std::size_t> doc_lengths_;
    double avg_length_ = 0.0;
    // term -> (doc index -> term frequency)
    std::map<std::string, std::map<std::size_t, std::size_t>> postings_;
};

// ---------------------------------------------------------------------------
// Dense scoring

// Cosine similarity. Throws RangeError on dimension mismatch or a zero vector.
double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b);

// ---------------------------------------------------------------------------
// LLM-prompted relevance

inline constexpr std::string_view kDefaultRelevanceTemplate =
    "Rate how useful the candidate evidence is for answering the last user turn of the\n"
    "dialogue. Reply with a single number between 0.0 and 1.0, where 0.0 means unrelated\n"
    "and 1.0 means it directly answers the turn.\n"
    "\n"
    "Dialogue:\n"
    "{context}\n"
    "\n"
    "Evidence:\n"
    "{evidence}\n"
    "\n"
    "Score:";

// Builds the scoring prompt from a template with {context} and {evidence}
// placeholders.
ChatRequest build_relevance_prompt(const std::string& context_text, const std::string& evidence_text,
                                   const std::string& template_text);

// Asks the chat provider to rate evidence utility and quantizes the first
// decimal number found in the reply. Throws ParseError when the reply holds
// no number, RangeError when it falls outside [0,1].
RelevanceScore llm_relevance(const std::string& context_text, const std::string& evidence_text,
                             ChatProvider& chat, const std::string& template_text);

// ---------------------------------------------------------------------------
// Scorers

// Scores a whole candidate pool against a query; raw scores align with pool
// order. Raw scores are clamped to [0,1] and quantized by retrieve_topk.
class EvidenceScorer {
public:
    virtual ~EvidenceScorer() = default;
    virtual std::vector<double> score_pool(const std::string& query,
                                           const std::vector<Evidence>& pool) = 0;
    virtual ScorerKind kind() const = 0;
};

class Bm25Scorer : public EvidenceScorer {
public:
    explicit Bm25Scorer(Bm25Params params = {}, Tokenizer tokenizer = default_tokenizer());
    std::vector<double> score_pool(const std::string& query,
                                   const std::vector<Evidence>& pool) override;
    ScorerKind kind() const override { return ScorerKind::bm25; }

private:
    Bm25Params params_;
    Tokenizer tokenizer_;
};

class DenseScorer : public EvidenceScorer {
public:
    explicit DenseScorer(EmbeddingProvider& embedder);
    std::vector<double> score_pool(const std::string& query,
                                   const std::vector<Evidence>& pool) override;
    ScorerKind kind() const override { return ScorerKind::dense; }

private:
    EmbeddingVector embed_cached(const std::string& text);

    EmbeddingProvider& embedder_;
    std::map<std::string, EmbeddingVector> cache_;
};

class LlmScorer : public EvidenceScorer {
public:
    LlmScorer(ChatProvider& chat, std::string template_text);
    std::vector<double> score_pool(const std::string& query,
                                   const std::vector<Evidence>& pool) override;
    ScorerKind kind() const override { return ScorerKind::llm; }

private:
    ChatProvider& chat_;
    std::string template_;
};

// Gold-aware scorer: labeled evidence ids score 1, everything else 0. Used
// for oracle pipeline runs and hard supervision labels.
class OracleScorer : public EvidenceScorer {
public:
    explicit OracleScorer(std::set<std::string> gold_ids, ScorerKind kind = ScorerKind::oracle);
    std::vector<double> score_pool(const std::string& query,
                                   const std::vector<Evidence>& pool) override;
    ScorerKind kind() const override { return kind_; }

private:
    std::set<std::string> gold_;
    ScorerKind kind_;
};

// ---------------------------------------------------------------------------
// Retrieval

enum class DependencyMode {
    augment,  // append the prerequisite's top evidence text to the query
    filter,   // additionally restrict the pool to docs linked to it
};

struct RetrievalConfig {
    ScorerKind scorer = ScorerKind::bm25;
    int top_n = 1;
    DependencyMode dependency_mode = DependencyMode::augment;
    Bm25Params bm25;
    std::string relevance_template = std::string(kDefaultRelevanceTemplate);
};

// Builds the scorer selected by the config. `gold` feeds the oracle scorer
// and may be empty otherwise.
std::unique_ptr<EvidenceScorer> make_scorer(const RetrievalConfig& config,
                                            const ProviderHandles& providers,
                                            std::set<std::string> gold = {});

// Scores the pool, ranks by raw score (descending) breaking ties by evidence
// id (ascending), truncates to top_n, and quantizes each kept raw score onto
// the evaluation-token grid. Throws RangeError on an empty pool or top_n < 1.
std::vector<ScoredEvidence> retrieve_topk(const std::string& query,
                                          const std::vector<Evidence>& pool,
                                          EvidenceScorer& scorer, int top_n);

// Retrieves for every source of the plan in order. A source with registry
// dependencies inside the plan gets a chained query: the base query plus the
// top-1 evidence text of each planned prerequisite (and, in filter mode, a
// pool restricted to docs whose parent link matches a prerequisite's top-1).
// Empty plan => empty result. Throws ChainError when a prerequisite in the
// plan produced no evidence to chain on.
std::map<std::string, std::vector<ScoredEvidence>> retrieve_chain(
    const DialogueContext& context, const Plan& plan, const SourceRegistry& registry,
    const RetrievalConfig& config, const ProviderHandles& providers,
    const std::set<std::string>& oracle_gold = {});

// ---------------------------------------------------------------------------
// Recall@k

// 1 when any of the top-k ranked ids is gold, else 0. Throws RangeError on
// k < 1 or empty gold.
int hit_at_k(const std::vector<std::string>& ranked_ids, const std::set<std::string>& gold_ids,
             int k);

struct RecallResult {
    double mean = 0.0;      // over evaluated queries
    std::size_t n_evaluated = 0;
    std::size_t n_skipped = 0;  // queries with empty gold

    friend bool operator==(const RecallResult& a, const RecallResult& b) {
        return a.mean == b.mean && a.n_evaluated == b.n_evaluated && a.n_skipped == b.n_skipped;
    }
};

// Mean hit rate over queries; queries with empty gold are skipped and
// counted. Throws RangeError when every query is skipped.
RecallResult recall_at_k(const std::vector<std::vector<std::string>>& ranked_ids_per_query,
                         const std::vector<std::set<std::string>>& gold_per_query, int k);

}  // namespace msrag
