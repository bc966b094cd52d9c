#include "msrag/reader.hpp"

#include <algorithm>
#include <random>

namespace msrag {

std::vector<ScoredEvidence> shuffle_evidence(std::vector<ScoredEvidence> evidences,
                                             std::uint64_t seed) {
    // Hand-rolled Fisher-Yates: std::shuffle's output is implementation
    // defined, and records must be byte-identical across toolchains.
    std::mt19937_64 rng(seed);
    for (std::size_t i = evidences.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(evidences[i - 1], evidences[j]);
    }
    return evidences;
}

std::string_view to_string(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::context: return "context";
        case SegmentKind::source_header: return "source_header";
        case SegmentKind::evidence: return "evidence";
        case SegmentKind::sim: return "sim";
        case SegmentKind::response_slot: return "response_slot";
    }
    throw RangeError("unknown segment kind");
}

// ---------------------------------------------------------------------------
// assemble_input

AssembledPrompt assemble_input(const DialogueContext& context, const Plan& plan,
                               const std::vector<ScoredEvidence>& evidences) {
    for (const ScoredEvidence& item : evidences) {
        if (!plan.contains(item.evidence.source)) {
            throw SchemaError("evidence " + item.evidence.id + " belongs to source " +
                              item.evidence.source.name() + " which the plan does not include");
        }
    }
    if (plan.is_null() && !evidences.empty()) {
        throw SchemaError("the NULL decision admits no evidence");
    }

    AssembledPrompt out;
    auto add_segment = [&](SegmentKind kind, int index, const std::string& piece) {
        std::size_t begin = out.text.size();
        out.text += piece;
        out.segments.push_back({kind, index, begin, out.text.size()});
    };

    add_segment(SegmentKind::context, -1, render_context(context));
    add_segment(SegmentKind::source_header, -1, "\n" + serialize_plan(plan));
    for (std::size_t i = 0; i < evidences.size(); ++i) {
        add_segment(SegmentKind::evidence, static_cast<int>(i),
                    " " + std::string(tokens::kEvidenceBegin) + " " + evidences[i].evidence.text +
                        " " + std::string(tokens::kEvidenceEnd));
        add_segment(SegmentKind::sim, static_cast<int>(i), " " + evidences[i].score.token());
    }
    add_segment(SegmentKind::response_slot, -1, " ");
    return out;
}

// ---------------------------------------------------------------------------
// AttentionMask

AttentionMask::AttentionMask(std::size_t n, std::vector<bool> allowed)
    : n_(n), allowed_(std::move(allowed)) {
    if (allowed_.size() != n_ * n_) {
        throw RangeError("attention mask storage size mismatch");
    }
}

bool AttentionMask::allowed(std::size_t row, std::size_t col) const {
    if (row >= n_ || col >= n_) throw RangeError("attention mask index out of range");
    return allowed_[row * n_ + col];
}

bool AttentionMask::pure_causal() const {
    for (std::size_t r = 0; r < n_; ++r) {
        for (std::size_t c = 0; c < n_; ++c) {
            if (allowed_[r * n_ + c] != (c <= r)) return false;
        }
    }
    return true;
}

AttentionMask build_attention_mask(const AssembledPrompt& prompt) {
    const std::vector<Segment>& segments = prompt.segments;
    std::size_t n = segments.size();
    std::vector<bool> allowed(n * n, false);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
            const Segment& row = segments[r];
            const Segment& col = segments[c];
            bool ok = true;
            if (row.kind == SegmentKind::evidence) {
                // Evidence items are scored independently: no peeking at
                // other evidence or at other items' evaluation tokens.
                if (col.kind == SegmentKind::evidence && col.index != row.index) ok = false;
                if (col.kind == SegmentKind::sim && col.index != row.index) ok = false;
            } else if (row.kind == SegmentKind::sim) {
                // The evaluation token sees only what its judgment needs:
                // dialogue, plan decision, its own evidence, itself.
                bool own = (col.kind == SegmentKind::evidence && col.index == row.index) ||
                           (col.kind == SegmentKind::sim && col.index == row.index) ||
                           col.kind == SegmentKind::context ||
                           col.kind == SegmentKind::source_header;
                if (!own) ok = false;
            }
            allowed[r * n + c] = ok;
        }
    }
    return AttentionMask(n, std::move(allowed));
}

// ---------------------------------------------------------------------------
// generate_response

std::string generate_response(const AssembledPrompt& prompt, ChatProvider& chat,
                              const GenParams& params) {
    ChatRequest request;
    request.params = params;
    request.messages.push_back({"user", prompt.text});
    std::string reply = chat.chat(request);
    std::size_t begin = reply.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        throw ProviderError("generator returned an empty response", /*transient=*/false);
    }
    std::size_t end = reply.find_last_not_of(" \t\r\n");
    return reply.substr(begin, end - begin + 1);
}

// ---------------------------------------------------------------------------
// TrainingRecord

nlohmann::ordered_json TrainingRecord::to_json() const {
    nlohmann::ordered_json out;
    out["input"] = input;
    out["target"] = target;
    nlohmann::ordered_json mask_json;
    mask_json["segments"] = nlohmann::ordered_json::array();
    for (const Segment& segment : full.segments) {
        nlohmann::ordered_json s;
        s["kind"] = std::string(to_string(segment.kind));
        if (segment.index >= 0) s["index"] = segment.index;
        s["begin"] = segment.begin;
        s["end"] = segment.end;
        mask_json["segments"].push_back(std::move(s));
    }
    // Blocked cells as [row, first_col, last_col] runs (run-length encoding
    // over each row of the causal triangle).
    mask_json["blocked"] = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < mask.size(); ++r) {
        std::size_t c = 0;
        while (c <= r) {
            if (mask.allowed(r, c)) {
                ++c;
                continue;
            }
            std::size_t run_start = c;
            while (c <= r && !mask.allowed(r, c)) ++c;
            mask_json["blocked"].push_back({r, run_start, c - 1});
        }
    }
    out["mask"] = std::move(mask_json);
    return out;
}

TrainingRecord emit_training_record(const Sample& sample, const LabelCache& cache,
                                    ScorerKind label_scorer, std::uint64_t seed) {
    // Candidates: every document of every planned source, in plan order then
    // document order, each with its cached label.
    std::vector<ScoredEvidence> candidates;
    for (const SourceId& source : sample.label_plan.ordered) {
        for (const Evidence& doc : sample.registry.docs(source)) {
            const LabelCacheEntry* entry = cache.lookup(sample.id, doc.id, label_scorer);
            if (entry == nullptr) {
                throw SchemaError("no cached " + std::string(to_string(label_scorer)) +
                                  " label for evidence " + doc.id + " of sample " + sample.id);
            }
            candidates.push_back({doc, entry->score, label_scorer});
        }
    }
    candidates = shuffle_evidence(std::move(candidates), seed);

    TrainingRecord record;
    AssembledPrompt assembled = assemble_input(sample.context, sample.label_plan, candidates);
    // The response slot carries the reference response in a training record.
    record.input = render_context(sample.context);
    Segment& slot = assembled.segments.back();
    assembled.text += sample.reference_response;
    slot.end = assembled.text.size();
    record.full = std::move(assembled);
    record.target = record.full.text.substr(record.input.size() + 1);  // skip the joining newline
    record.mask = build_attention_mask(record.full);
    return record;
}

}  // namespace msrag
