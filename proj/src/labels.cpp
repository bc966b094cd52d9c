#include "msrag/labels.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>

#include <json.hpp>

namespace msrag {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string cache_key(const std::string& sample_id, const std::string& evidence_id,
                      ScorerKind scorer) {
    std::string key = sample_id;
    key += '\x1f';
    key += evidence_id;
    key += '\x1f';
    key += to_string(scorer);
    return key;
}

}  // namespace

std::string rfc3339_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

// ---------------------------------------------------------------------------
// LabelCache

LabelCache LabelCache::load(const std::filesystem::path& path) {
    LabelCache cache;
    std::ifstream in(path);
    if (!in) return cache;  // missing file == empty cache
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
        try {
            LabelCacheEntry entry;
            entry.sample_id = record.at("sample_id").get<std::string>();
            entry.evidence_id = record.at("evidence_id").get<std::string>();
            entry.score = RelevanceScore::from_token(record.at("score").get<std::string>());
            entry.scorer = scorer_kind_from_string(record.at("scorer").get<std::string>());
            entry.model = record.value("model", std::string());
            entry.timestamp = record.value("timestamp", std::string());
            cache.entries_[cache_key(entry.sample_id, entry.evidence_id, entry.scorer)] =
                std::move(entry);
        } catch (const json::exception& e) {
            throw SchemaError(where + ": bad label entry: " + e.what());
        } catch (const ParseError& e) {
            throw SchemaError(where + ": bad label entry: " + std::string(e.what()));
        }
    }
    return cache;
}

void LabelCache::put(const LabelCacheEntry& entry,
                     const std::optional<std::filesystem::path>& path) {
    entries_[cache_key(entry.sample_id, entry.evidence_id, entry.scorer)] = entry;
    if (path) {
        std::ofstream out(*path, std::ios::app);
        if (!out) {
            throw SchemaError("cannot append to label cache: " + path->string());
        }
        ordered_json record;
        record["sample_id"] = entry.sample_id;
        record["evidence_id"] = entry.evidence_id;
        record["score"] = entry.score.token();
        record["scorer"] = std::string(to_string(entry.scorer));
        record["model"] = entry.model;
        record["timestamp"] = entry.timestamp;
        out << record.dump() << '\n';
    }
}

const LabelCacheEntry* LabelCache::lookup(const std::string& sample_id,
                                          const std::string& evidence_id,
                                          ScorerKind scorer) const {
    auto it = entries_.find(cache_key(sample_id, evidence_id, scorer));
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<LabelCacheEntry> LabelCache::entries() const {
    std::vector<LabelCacheEntry> out;
    out.reserve(entries_.size());
    for (const auto& [key, entry] : entries_) out.push_back(entry);
    return out;
}

// ---------------------------------------------------------------------------
// precompute_labels

PrecomputeSummary precompute_labels(const std::vector<Sample>& samples, const LabelConfig& config,
                                    const ProviderHandles& providers, LabelCache& cache,
                                    const std::filesystem::path& cache_path) {
    if (config.scorer != ScorerKind::llm && config.scorer != ScorerKind::dense &&
        config.scorer != ScorerKind::hard) {
        throw ConfigError("label scorer must be llm, dense, or hard");
    }

    PrecomputeSummary summary;
    for (const Sample& sample : samples) {
        // The scorer sees the full dialogue as its query.
        std::string query = context_query_text(sample.context);

        std::set<std::string> gold_all;
        for (const auto& [source, ids] : sample.label_evidence) {
            gold_all.insert(ids.begin(), ids.end());
        }

        RetrievalConfig rc;
        rc.scorer = config.scorer;
        if (!config.relevance_template.empty()) rc.relevance_template = config.relevance_template;
        std::unique_ptr<EvidenceScorer> scorer = make_scorer(rc, providers, gold_all);

        for (const SourceId& source : sample.registry.sources()) {
            const std::vector<Evidence>& pool = sample.registry.docs(source);
            if (pool.empty()) continue;

            // Which pool members still need labels?
            std::vector<bool> needed(pool.size(), false);
            bool any_needed = false;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (cache.lookup(sample.id, pool[i].id, config.scorer) == nullptr) {
                    needed[i] = any_needed = true;
                } else {
                    ++summary.n_cached;
                }
            }
            if (!any_needed) continue;

            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (!needed[i]) continue;
                try {
                    // Score one document at a time so one failure does not
                    // discard its neighbours.
                    std::vector<Evidence> single{pool[i]};
                    double raw = scorer->score_pool(query, single).at(0);
                    LabelCacheEntry entry;
                    entry.sample_id = sample.id;
                    entry.evidence_id = pool[i].id;
                    entry.score = quantize_score(std::clamp(raw, 0.0, 1.0));
                    entry.scorer = config.scorer;
                    entry.model = config.model;
                    entry.timestamp = rfc3339_utc_now();
                    cache.put(entry, cache_path);
                    ++summary.n_new;
                } catch (const Error& e) {
                    ++summary.n_failed;
                    summary.failures.push_back(sample.id + "/" + pool[i].id + ": " + e.what());
                }
            }
        }
    }
    return summary;
}

// ---------------------------------------------------------------------------
// nll_loss

double nll_loss(const ContrastiveBatch& batch) {
    if (batch.negatives.empty()) {
        throw RangeError("contrastive batch needs at least one negative");
    }
    if (!std::isfinite(batch.positive)) {
        throw RangeError("positive logit is not finite");
    }
    for (double s : batch.negatives) {
        if (!std::isfinite(s)) throw RangeError("negative logit is not finite");
    }
    // -ln(exp(s+)/sum exp(s)) = logsumexp(all) - s+, stabilized by the max.
    double max_logit = batch.positive;
    for (double s : batch.negatives) max_logit = std::max(max_logit, s);
    double sum = std::exp(batch.positive - max_logit);
    for (double s : batch.negatives) sum += std::exp(s - max_logit);
    return (max_logit + std::log(sum)) - batch.positive;
}

ContrastiveBatch build_batch(const std::vector<ScoredEvidence>& scored, const std::string& gold_id,
                             const std::vector<double>& fallback_negatives) {
    ContrastiveBatch batch;
    bool found = false;
    for (const ScoredEvidence& item : scored) {
        if (!found && item.evidence.id == gold_id) {
            batch.positive = item.score.value();
            found = true;
        } else {
            batch.negatives.push_back(item.score.value());
        }
    }
    if (!found) {
        throw RangeError("gold evidence " + gold_id + " is not in the scored batch");
    }
    if (batch.negatives.empty()) {
        // No in-batch negative: borrow one scored from another sample.
        if (fallback_negatives.empty()) {
            throw RangeError("contrastive batch needs at least one negative");
        }
        batch.negatives.push_back(fallback_negatives.front());
        batch.substitute_injected = true;
    }
    return batch;
}

}  // namespace msrag
