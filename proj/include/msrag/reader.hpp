#pragma once
// Reader-side input assembly: the exact wire text the generator consumes
// (context, plan decision, evidence blocks with their evaluation tokens), the
// segment-level attention mask that keeps evidence items from attending to
// each other, response generation, and training-record export.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "msrag/core.hpp"
#include "msrag/corpus.hpp"
#include "msrag/labels.hpp"
#include "msrag/providers.hpp"

namespace msrag {

// ---------------------------------------------------------------------------
// Evidence shuffling

// Deterministic Fisher-Yates permutation seeded by `seed`; the same inputs
// and seed give the same order on every platform. Used during training-record
// export so evidence position carries no signal.
std::vector<ScoredEvidence> shuffle_evidence(std::vector<ScoredEvidence> evidences,
                                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Assembly

enum class SegmentKind { context, source_header, evidence, sim, response_slot };

std::string_view to_string(SegmentKind kind);

struct Segment {
    SegmentKind kind;
    int index;          // evidence pair index for evidence/sim segments, else -1
    std::size_t begin;  // byte offsets into the assembled text, [begin, end)
    std::size_t end;

    friend bool operator==(const Segment& a, const Segment& b) {
        return a.kind == b.kind && a.index == b.index && a.begin == b.begin && a.end == b.end;
    }
};

struct AssembledPrompt {
    std::string text;
    std::vector<Segment> segments;  // tile the text exactly, in order
};

// Renders "{context}\n{plan} [EVIDENCE] {text} [EOE] {sim} ... " with one
// evidence/sim segment pair per item and a trailing response slot. The plan
// must be valid for the evidence list: every evidence's source appears in the
// plan (throws SchemaError otherwise). An empty plan renders the NULL
// decision and allows no evidence.
AssembledPrompt assemble_input(const DialogueContext& context, const Plan& plan,
                               const std::vector<ScoredEvidence>& evidences);

// ---------------------------------------------------------------------------
// Attention mask

// Segment-level mask over an assembled prompt. Base is causal (each segment
// attends to itself and everything before it); on top of that, evidence
// segments never attend to other evidence or to other items' evaluation
// tokens, and an evaluation token attends only to the context, the plan
// header, its own evidence, and itself. With zero or one evidence item the
// mask degenerates to pure causal.
class AttentionMask {
public:
    AttentionMask(std::size_t n, std::vector<bool> allowed);

    std::size_t size() const { return n_; }
    bool allowed(std::size_t row, std::size_t col) const;
    bool pure_causal() const;

    friend bool operator==(const AttentionMask& a, const AttentionMask& b) {
        return a.n_ == b.n_ && a.allowed_ == b.allowed_;
    }

private:
    std::size_t n_;
    std::vector<bool> allowed_;  // row-major n x n
};

AttentionMask build_attention_mask(const AssembledPrompt& prompt);

// ---------------------------------------------------------------------------
// Generation

// Sends the assembled text as a single user message and returns the reply
// with outer whitespace trimmed. Throws ProviderError on an empty reply.
std::string generate_response(const AssembledPrompt& prompt, ChatProvider& chat,
                              const GenParams& params = {});

// ---------------------------------------------------------------------------
// Training records

struct TrainingRecord {
    std::string input;   // rendered dialogue context
    std::string target;  // plan decision + evidence blocks + response
    AssembledPrompt full;  // input + target with segment offsets
    AttentionMask mask = AttentionMask(0, {});

    // {"input", "target", "mask": {"segments": [...], "blocked": [[row, lo, hi], ...]}}
    // where each blocked triple is a run of columns the mask removes from the
    // causal triangle of that row.
    nlohmann::ordered_json to_json() const;
};

// Builds the teacher-forcing record for one sample: candidates are all
// documents of the gold plan's sources (plan order, then document order),
// shuffled with `seed`, each carrying its cached relevance label. Throws
// SchemaError when a needed label is missing from the cache (naming the
// evidence id).
TrainingRecord emit_training_record(const Sample& sample, const LabelCache& cache,
                                    ScorerKind label_scorer, std::uint64_t seed);

}  // namespace msrag
