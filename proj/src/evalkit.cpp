#include "msrag/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msrag/corpus.hpp"

namespace msrag {

namespace {

// Decodes one UTF-8 codepoint starting at `i`; advances `i` past it. Invalid
// bytes decode as themselves (latin-1 style) so no input can throw here.
char32_t decode_utf8(std::string_view text, std::size_t& i) {
    unsigned char lead = static_cast<unsigned char>(text[i]);
    int extra = 0;
    char32_t cp = lead;
    if (lead >= 0xf0) {
        extra = 3;
        cp = lead & 0x07;
    } else if (lead >= 0xe0) {
        extra = 2;
        cp = lead & 0x0f;
    } else if (lead >= 0xc0) {
        extra = 1;
        cp = lead & 0x1f;
    }
    if (i + extra >= text.size() + (extra == 0 ? 1 : 0)) {
        // Truncated sequence; treat the lead byte as a lone character.
        ++i;
        return lead;
    }
    for (int k = 1; k <= extra; ++k) {
        unsigned char cont = static_cast<unsigned char>(text[i + k]);
        if ((cont & 0xc0) != 0x80) {
            ++i;
            return lead;
        }
        cp = (cp << 6) | (cont & 0x3f);
    }
    i += extra + 1;
    return cp;
}

// CJK blocks that should split into single-character tokens: unified
// ideographs (+ extension A), compatibility ideographs, kana, and CJK
// punctuation/fullwidth forms.
bool is_cjk(char32_t cp) {
    return (cp >= 0x4e00 && cp <= 0x9fff) || (cp >= 0x3400 && cp <= 0x4dbf) ||
           (cp >= 0xf900 && cp <= 0xfaff) || (cp >= 0x3040 && cp <= 0x30ff) ||
           (cp >= 0x3000 && cp <= 0x303f) || (cp >= 0xff00 && cp <= 0xffef) ||
           (cp >= 0x20000 && cp <= 0x2a6df);
}

bool is_ascii_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v';
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode) {
    std::vector<std::string> out;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        char32_t cp = decode_utf8(text, i);
        if (is_ascii_space(cp)) {
            if (!current.empty()) {
                out.push_back(current);
                current.clear();
            }
            continue;
        }
        if (mode == TokenizeMode::char_cjk && is_cjk(cp)) {
            if (!current.empty()) {
                out.push_back(current);
                current.clear();
            }
            out.emplace_back(text.substr(start, i - start));
            continue;
        }
        current.append(text.substr(start, i - start));
    }
    if (!current.empty()) out.push_back(current);
    return out;
}

// ---------------------------------------------------------------------------
// ClassScheme

std::string ClassScheme::classify_signature(const std::string& signature) const {
    auto it = classes.find(signature);
    return it == classes.end() ? signature : it->second;
}

std::string ClassScheme::classify(const Plan& plan) const {
    return classify_signature(plan_signature(plan));
}

// ---------------------------------------------------------------------------
// f1_per_class

std::map<std::string, F1Stats> f1_per_class(const std::vector<Plan>& predicted,
                                            const std::vector<Plan>& gold,
                                            const ClassScheme& scheme) {
    if (predicted.size() != gold.size()) {
        throw RangeError("predicted/gold plan count mismatch");
    }
    if (predicted.empty()) {
        throw RangeError("cannot compute F1 over zero samples");
    }
    std::map<std::string, F1Stats> out;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        std::string p = scheme.classify(predicted[i]);
        std::string g = scheme.classify(gold[i]);
        ++out[g].support;
        if (p == g) {
            ++out[p].tp;
        } else {
            ++out[p].fp;
            ++out[g].fn;
        }
    }
    for (auto& [label, stats] : out) {
        std::size_t pred_count = stats.tp + stats.fp;
        if (stats.tp == 0) {
            stats.precision = stats.recall = stats.f1 = 0.0;
            continue;
        }
        stats.precision = static_cast<double>(stats.tp) / static_cast<double>(pred_count);
        stats.recall = static_cast<double>(stats.tp) / static_cast<double>(stats.tp + stats.fn);
        stats.f1 = 2.0 * stats.precision * stats.recall / (stats.precision + stats.recall);
    }
    return out;
}

// ---------------------------------------------------------------------------
// bleu1

double bleu1(const std::string& candidate, const std::string& reference, TokenizeMode mode) {
    std::vector<std::string> ref = tokenize(reference, mode);
    if (ref.empty()) throw RangeError("bleu1 needs a non-empty reference");
    std::vector<std::string> cand = tokenize(candidate, mode);
    if (cand.empty()) return 0.0;

    std::map<std::string, std::size_t> ref_counts;
    for (const std::string& token : ref) ++ref_counts[token];
    std::map<std::string, std::size_t> cand_counts;
    for (const std::string& token : cand) ++cand_counts[token];

    std::size_t clipped = 0;
    for (const auto& [token, count] : cand_counts) {
        auto it = ref_counts.find(token);
        if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    double precision = static_cast<double>(clipped) / static_cast<double>(cand.size());
    double brevity = std::exp(std::min(
        0.0, 1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size())));
    return precision * brevity;
}

// ---------------------------------------------------------------------------
// rouge_l

double rouge_l(const std::string& candidate, const std::string& reference, TokenizeMode mode) {
    std::vector<std::string> ref = tokenize(reference, mode);
    if (ref.empty()) throw RangeError("rouge_l needs a non-empty reference");
    std::vector<std::string> cand = tokenize(candidate, mode);
    if (cand.empty()) return 0.0;

    // Classic O(|cand| * |ref|) LCS table, rolling rows.
    std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            if (cand[i - 1] == ref[j - 1]) {
                cur[j] = prev[j - 1] + 1;
            } else {
                cur[j] = std::max(prev[j], cur[j - 1]);
            }
        }
        std::swap(prev, cur);
    }
    double lcs = static_cast<double>(prev[ref.size()]);
    if (lcs == 0.0) return 0.0;
    double p = lcs / static_cast<double>(cand.size());
    double r = lcs / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// consistency_rate

ConsistencyResult consistency_rate(
    const std::vector<std::pair<std::string, std::string>>& premise_hypothesis_pairs,
    NliProvider& nli, double threshold) {
    if (premise_hypothesis_pairs.empty()) {
        throw RangeError("consistency rate needs at least one pair");
    }
    ConsistencyResult result;
    result.n_pairs = premise_hypothesis_pairs.size();
    for (const auto& [premise, hypothesis] : premise_hypothesis_pairs) {
        if (nli.entail(premise, hypothesis) >= threshold) ++result.n_consistent;
    }
    result.percentage =
        100.0 * static_cast<double>(result.n_consistent) / static_cast<double>(result.n_pairs);
    return result;
}

// ---------------------------------------------------------------------------
// EvalReport

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json out;
    out["n_samples"] = n_samples;
    out["planning_f1"] = nlohmann::ordered_json::object();
    for (const auto& [label, stats] : planning_f1) {
        out["planning_f1"][label] = {{"precision", stats.precision}, {"recall", stats.recall},
                                     {"f1", stats.f1},               {"tp", stats.tp},
                                     {"fp", stats.fp},               {"fn", stats.fn},
                                     {"support", stats.support}};
    }
    out["recall"] = nlohmann::ordered_json::object();
    out["recall"]["k"] = recall_k;
    out["recall"]["groups"] = nlohmann::ordered_json::object();
    for (const auto& [label, value] : recall_at_k) {
        out["recall"]["groups"][label] = {
            {"recall", value},
            {"n_evaluated", recall_evaluated.count(label) ? recall_evaluated.at(label) : 0}};
    }
    out["recall"]["n_skipped"] = recall_skipped;
    out["generation"] = {{"bleu1", bleu1_macro},
                         {"rouge_l", rouge_l_macro},
                         {"level", generation_metric_level}};
    out["consistency"] = nlohmann::ordered_json::object();
    if (persona_consistency) out["consistency"]["persona"] = *persona_consistency;
    if (knowledge_consistency) out["consistency"]["knowledge"] = *knowledge_consistency;
    return out;
}

}  // namespace msrag
