#include "msrag/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "msrag/evalkit.hpp"

namespace msrag {

Tokenizer default_tokenizer() {
    return [](std::string_view text) { return tokenize(text, TokenizeMode::char_cjk); };
}

// ---------------------------------------------------------------------------
// Bm25Index

Bm25Index::Bm25Index(const std::vector<Evidence>& docs, Tokenizer tokenizer, Bm25Params params)
    : params_(params), tokenizer_(std::move(tokenizer)) {
    if (docs.empty()) {
        throw RangeError("cannot index an empty document list");
    }
    std::size_t total_length = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        doc_ids_.push_back(docs[i].id);
        std::vector<std::string> terms = tokenizer_(docs[i].text);
        doc_lengths_.push_back(terms.size());
        total_length += terms.size();
        for (const std::string& term : terms) {
            ++postings_[term][i];
        }
    }
    avg_length_ = static_cast<double>(total_length) / static_cast<double>(docs.size());
}

double Bm25Index::idf(const std::string& term) const {
    auto it = postings_.find(term);
    double df = (it == postings_.end()) ? 0.0 : static_cast<double>(it->second.size());
    double n = static_cast<double>(doc_count());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<double> Bm25Index::score(const std::string& query) const {
    std::vector<double> scores(doc_count(), 0.0);
    for (const std::string& term : tokenizer_(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        double term_idf = idf(term);
        for (const auto& [doc, tf] : it->second) {
            double length_norm =
                1.0 - params_.b + params_.b * static_cast<double>(doc_lengths_[doc]) / avg_length_;
            double tf_component = (static_cast<double>(tf) * (params_.k1 + 1.0)) /
                                  (static_cast<double>(tf) + params_.k1 * length_norm);
            scores[doc] += term_idf * tf_component;
        }
    }
    return scores;
}

// ---------------------------------------------------------------------------
// cosine_sim

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.values.size() != b.values.size()) {
        throw RangeError("embedding dimension mismatch: " + std::to_string(a.values.size()) +
                         " vs " + std::to_string(b.values.size()));
    }
    if (a.values.empty()) {
        throw RangeError("cannot compare empty embeddings");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw RangeError("cosine similarity undefined for a zero vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------
// llm_relevance

namespace {

std::string apply_placeholders(std::string text,
                               const std::vector<std::pair<std::string, std::string>>& subs) {
    for (const auto& [key, value] : subs) {
        std::size_t pos;
        while ((pos = text.find(key)) != std::string::npos) {
            text.replace(pos, key.size(), value);
        }
    }
    return text;
}

// First decimal number in the reply, e.g. "0.7", "1", "relevance: 0.73".
std::optional<double> first_number(const std::string& text) {
    auto digit = [&text](std::size_t i) {
        return i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]));
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        bool bare_point = text[i] == '.' && digit(i + 1);  // ".25" style replies
        if (!digit(i) && !bare_point) continue;
        std::size_t end = i;
        while (digit(end)) ++end;
        if (end < text.size() && text[end] == '.') {
            ++end;
            while (digit(end)) ++end;
        }
        return std::stod(text.substr(i, end - i));
    }
    return std::nullopt;
}

}  // namespace

ChatRequest build_relevance_prompt(const std::string& context_text,
                                   const std::string& evidence_text,
                                   const std::string& template_text) {
    ChatRequest request;
    request.params.max_tokens = 8;
    request.messages.push_back(
        {"user", apply_placeholders(template_text,
                                    {{"{context}", context_text}, {"{evidence}", evidence_text}})});
    return request;
}

RelevanceScore llm_relevance(const std::string& context_text, const std::string& evidence_text,
                             ChatProvider& chat, const std::string& template_text) {
    std::string reply = chat.chat(build_relevance_prompt(context_text, evidence_text, template_text));
    std::optional<double> value = first_number(reply);
    if (!value) {
        throw ParseError("relevance reply holds no number", reply);
    }
    return quantize_score(*value);  // RangeError outside [0,1]
}

// ---------------------------------------------------------------------------
// Scorers

Bm25Scorer::Bm25Scorer(Bm25Params params, Tokenizer tokenizer)
    : params_(params), tokenizer_(std::move(tokenizer)) {}

std::vector<double> Bm25Scorer::score_pool(const std::string& query,
                                           const std::vector<Evidence>& pool) {
    Bm25Index index(pool, tokenizer_, params_);
    return index.score(query);
}

DenseScorer::DenseScorer(EmbeddingProvider& embedder) : embedder_(embedder) {}

EmbeddingVector DenseScorer::embed_cached(const std::string& text) {
    auto it = cache_.find(text);
    if (it != cache_.end()) return it->second;
    EmbeddingVector v = embedder_.embed(text);
    cache_[text] = v;
    return v;
}

std::vector<double> DenseScorer::score_pool(const std::string& query,
                                            const std::vector<Evidence>& pool) {
    EmbeddingVector q = embed_cached(query);
    std::vector<double> out;
    out.reserve(pool.size());
    for (const Evidence& doc : pool) {
        out.push_back(cosine_sim(q, embed_cached(doc.text)));
    }
    return out;
}

LlmScorer::LlmScorer(ChatProvider& chat, std::string template_text)
    : chat_(chat), template_(std::move(template_text)) {}

std::vector<double> LlmScorer::score_pool(const std::string& query,
                                          const std::vector<Evidence>& pool) {
    std::vector<double> out;
    out.reserve(pool.size());
    for (const Evidence& doc : pool) {
        out.push_back(llm_relevance(query, doc.text, chat_, template_).value());
    }
    return out;
}

OracleScorer::OracleScorer(std::set<std::string> gold_ids, ScorerKind kind)
    : gold_(std::move(gold_ids)), kind_(kind) {}

std::vector<double> OracleScorer::score_pool(const std::string&,
                                             const std::vector<Evidence>& pool) {
    std::vector<double> out;
    out.reserve(pool.size());
    for (const Evidence& doc : pool) {
        out.push_back(gold_.count(doc.id) != 0 ? 1.0 : 0.0);
    }
    return out;
}

std::unique_ptr<EvidenceScorer> make_scorer(const RetrievalConfig& config,
                                            const ProviderHandles& providers,
                                            std::set<std::string> gold) {
    switch (config.scorer) {
        case ScorerKind::bm25:
            return std::make_unique<Bm25Scorer>(config.bm25);
        case ScorerKind::dense:
            if (providers.embedder == nullptr) {
                throw ConfigError("dense scorer requires an embedding provider");
            }
            return std::make_unique<DenseScorer>(*providers.embedder);
        case ScorerKind::llm:
            if (providers.chat == nullptr) {
                throw ConfigError("llm scorer requires a chat provider");
            }
            return std::make_unique<LlmScorer>(*providers.chat, config.relevance_template);
        case ScorerKind::oracle:
        case ScorerKind::hard:
            return std::make_unique<OracleScorer>(std::move(gold), config.scorer);
        default:
            throw ConfigError("scorer kind not usable for retrieval: " +
                              std::string(to_string(config.scorer)));
    }
}

// ---------------------------------------------------------------------------
// retrieve_topk

std::vector<ScoredEvidence> retrieve_topk(const std::string& query,
                                          const std::vector<Evidence>& pool,
                                          EvidenceScorer& scorer, int top_n) {
    if (top_n < 1) throw RangeError("top_n must be >= 1");
    if (pool.empty()) throw RangeError("cannot retrieve from an empty pool");

    std::vector<double> raw = scorer.score_pool(query, pool);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (raw[a] != raw[b]) return raw[a] > raw[b];
        return pool[a].id < pool[b].id;
    });
    std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(top_n), pool.size());

    std::vector<ScoredEvidence> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        double clamped = std::clamp(raw[order[i]], 0.0, 1.0);
        out.push_back({pool[order[i]], quantize_score(clamped), scorer.kind()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// retrieve_chain

std::map<std::string, std::vector<ScoredEvidence>> retrieve_chain(
    const DialogueContext& context, const Plan& plan, const SourceRegistry& registry,
    const RetrievalConfig& config, const ProviderHandles& providers,
    const std::set<std::string>& oracle_gold) {
    std::vector<PlanViolation> violations = validate_plan(plan, registry);
    if (!violations.empty()) {
        throw ChainError("cannot retrieve for an invalid plan: " + violations.front().to_string());
    }

    std::map<std::string, std::vector<ScoredEvidence>> out;
    if (plan.is_null()) return out;

    std::unique_ptr<EvidenceScorer> scorer = make_scorer(config, providers, oracle_gold);
    std::string base_query = context_query_text(context);

    for (const SourceId& source : plan.ordered) {
        std::string query = base_query;
        std::vector<std::string> prerequisite_top_ids;
        for (const SourceId& dep : registry.depends_on(source)) {
            if (!plan.contains(dep)) continue;  // validate_plan guarantees presence; belt and braces
            auto it = out.find(dep.name());
            if (it == out.end() || it->second.empty()) {
                throw ChainError("prerequisite " + dep.name() + " produced no evidence for " +
                                 source.name());
            }
            query += '\n';
            query += it->second.front().evidence.text;
            prerequisite_top_ids.push_back(it->second.front().evidence.id);
        }

        std::vector<Evidence> pool = registry.docs(source);
        if (config.dependency_mode == DependencyMode::filter && !prerequisite_top_ids.empty()) {
            std::vector<Evidence> filtered;
            for (const Evidence& doc : pool) {
                if (doc.parent && std::find(prerequisite_top_ids.begin(),
                                            prerequisite_top_ids.end(),
                                            *doc.parent) != prerequisite_top_ids.end()) {
                    filtered.push_back(doc);
                }
            }
            // An empty filter result keeps the full pool: no doc is linked to
            // the chained evidence, so there is nothing to restrict by.
            if (!filtered.empty()) pool = std::move(filtered);
        }
        if (pool.empty()) {
            throw ChainError("source " + source.name() + " has no documents to retrieve from");
        }
        out[source.name()] = retrieve_topk(query, pool, *scorer, config.top_n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Recall@k

int hit_at_k(const std::vector<std::string>& ranked_ids, const std::set<std::string>& gold_ids,
             int k) {
    if (k < 1) throw RangeError("k must be >= 1");
    if (gold_ids.empty()) throw RangeError("hit_at_k needs non-empty gold ids");
    std::size_t limit = std::min<std::size_t>(static_cast<std::size_t>(k), ranked_ids.size());
    for (std::size_t i = 0; i < limit; ++i) {
        if (gold_ids.count(ranked_ids[i]) != 0) return 1;
    }
    return 0;
}

RecallResult recall_at_k(const std::vector<std::vector<std::string>>& ranked_ids_per_query,
                         const std::vector<std::set<std::string>>& gold_per_query, int k) {
    if (ranked_ids_per_query.size() != gold_per_query.size()) {
        throw RangeError("ranked/gold list size mismatch");
    }
    RecallResult result;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked_ids_per_query.size(); ++i) {
        if (gold_per_query[i].empty()) {
            ++result.n_skipped;
            continue;
        }
        hits += static_cast<std::size_t>(hit_at_k(ranked_ids_per_query[i], gold_per_query[i], k));
        ++result.n_evaluated;
    }
    if (result.n_evaluated == 0) {
        throw RangeError("recall@k evaluated zero queries (all gold sets empty)");
    }
    result.mean = static_cast<double>(hits) / static_cast<double>(result.n_evaluated);
    return result;
}

}  // namespace msrag
