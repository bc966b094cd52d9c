#pragma once
// Pipeline: wires corpus, providers, planner, retrieval, reader, refinement,
// and metrics into runnable stages with fixed artifact formats. The CLI
// subcommands are thin wrappers over these functions, and composing stages
// separately (feeding artifacts forward) yields the same report as the
// all-in-one eval run.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msrag/corpus.hpp"
#include "msrag/evalkit.hpp"
#include "msrag/labels.hpp"
#include "msrag/planner.hpp"
#include "msrag/providers.hpp"
#include "msrag/refine.hpp"
#include "msrag/retrieval.hpp"

namespace msrag {

// ---------------------------------------------------------------------------
// Provider wiring

struct ProviderSetup {
    std::string chat_kind = "mock";     // mock | http
    std::string embed_kind = "mock";    // mock | http
    std::string nli_kind = "overlap";   // overlap | constant | http
    ProviderConfig chat_http;
    ProviderConfig embed_http;
    ProviderConfig nli_http;
    std::string chat_mock_reply = "OK.";  // mock chat default reply
    double nli_constant = 1.0;
    std::uint64_t embed_seed = 0;
    std::size_t embed_dim = 64;
};

// Owns the provider instances selected by the setup.
struct ProviderBundle {
    std::unique_ptr<ChatProvider> chat;
    std::unique_ptr<EmbeddingProvider> embedder;
    std::unique_ptr<NliProvider> nli;

    ProviderHandles handles() const;
};

ProviderBundle make_providers(const ProviderSetup& setup);

// ---------------------------------------------------------------------------
// Run configuration

struct EvalOptions {
    int k = 1;
    ClassScheme scheme;                               // empty = identity
    std::map<std::string, std::string> source_roles;  // name -> persona|knowledge|ignore
    double nli_threshold = 0.5;
    std::string grounding = "gold";              // gold | predicted
    std::string recall_grouping = "class-source";  // source | class-source
};

struct RunConfig {
    std::filesystem::path corpus;
    std::filesystem::path out_dir = "out";
    std::filesystem::path labels_file;  // empty = out_dir/labels.jsonl
    ProviderSetup providers;
    PlannerConfig planner;
    RetrievalConfig retrieval;
    LabelConfig labels;
    RefinementConfig refine;
    std::string generator = "llm";  // llm | reference (echo the reference response)
    GenParams gen;
    EvalOptions eval;
    int parallelism = 1;
    std::uint64_t seed = 0;

    std::filesystem::path labels_path() const {
        return labels_file.empty() ? out_dir / "labels.jsonl" : labels_file;
    }
};

// The persona/knowledge pool a source's grounding belongs to. Explicit
// mapping wins; the fallback heuristic sends names containing "PER" to the
// persona pool and everything else to the knowledge pool.
std::string source_role(const std::string& source_name, const EvalOptions& options);

// ---------------------------------------------------------------------------
// Stages (all sample-parallel per --parallelism, outputs ordered by sample)

// Loads the corpus and orders samples by id so downstream artifacts are
// deterministic regardless of file or completion order.
std::vector<Sample> load_samples_sorted(const std::filesystem::path& path);

std::vector<PlanResult> run_plan_stage(const std::vector<Sample>& samples, const RunConfig& config,
                                       const ProviderHandles& providers);

// Retrieval for one sample under one plan: source name -> ranked evidence.
using SampleRetrieval = std::map<std::string, std::vector<ScoredEvidence>>;

// Retrieves for each sample under the given plan (top_n_override lifts the
// ranking depth, e.g. to k for recall evaluation).
std::vector<SampleRetrieval> run_retrieve_stage(const std::vector<Sample>& samples,
                                                const std::vector<Plan>& plans,
                                                const RunConfig& config,
                                                const ProviderHandles& providers,
                                                int top_n_override = 0);

// Evidence fed to the generator: the plan's sources in order, each source's
// ranked evidence in order.
std::vector<ScoredEvidence> flatten_evidence(const Plan& plan, const SampleRetrieval& retrieval);

std::vector<std::string> run_generate_stage(const std::vector<Sample>& samples,
                                            const std::vector<Plan>& plans,
                                            const std::vector<SampleRetrieval>& retrievals,
                                            const RunConfig& config,
                                            const ProviderHandles& providers);

struct RefineStageResult {
    std::vector<std::string> responses;
    std::vector<std::vector<PassTrace>> traces;
    std::vector<std::vector<ScoredEvidence>> evidences;
};

RefineStageResult run_refine_stage(const std::vector<Sample>& samples,
                                   const std::vector<Plan>& plans,
                                   const std::vector<SampleRetrieval>& retrievals,
                                   const std::vector<std::string>& responses,
                                   const RunConfig& config, const ProviderHandles& providers);

// Recall evaluation conditions on gold plans (samples whose gold plan is
// empty are out of scope; sources without gold evidence are skipped and
// counted).
struct RecallEval {
    std::map<std::string, RecallResult> groups;  // group label -> result
    std::size_t n_skipped = 0;
    // sample id -> source name -> ranked evidence (depth >= k)
    std::map<std::string, SampleRetrieval> per_sample;
};

RecallEval run_recall_eval(const std::vector<Sample>& samples, const RunConfig& config,
                           const ProviderHandles& providers);

// Builds the full report from predicted plans and responses; recall comes
// from run_recall_eval on the same config. `retrievals` (predicted-plan
// rankings) ground the consistency metrics when grounding = "predicted".
EvalReport evaluate(const std::vector<Sample>& samples, const std::vector<Plan>& plans,
                    const std::vector<SampleRetrieval>& retrievals,
                    const std::vector<std::string>& responses, const RunConfig& config,
                    const ProviderHandles& providers);

// ---------------------------------------------------------------------------
// Artifact IO (fixed file names under out_dir)

void write_stats_artifact(const std::filesystem::path& path, const CorpusStats& stats);

void write_plans_artifact(const std::filesystem::path& path, const std::vector<Sample>& samples,
                          const std::vector<PlanResult>& results);
// Reads a plans artifact back, aligned with `samples`. Throws SchemaError on
// unknown or missing sample ids.
std::vector<Plan> read_plans_artifact(const std::filesystem::path& path,
                                      const std::vector<Sample>& samples);

void write_retrieval_artifact(const std::filesystem::path& path, const RecallEval& recall,
                              const RunConfig& config);

void write_responses_artifact(const std::filesystem::path& path,
                              const std::vector<Sample>& samples,
                              const std::vector<Plan>& plans,
                              const std::vector<SampleRetrieval>& retrievals,
                              const std::vector<std::string>& responses);
struct ResponsesArtifact {
    std::vector<Plan> plans;
    std::vector<SampleRetrieval> retrievals;
    std::vector<std::string> responses;
};
ResponsesArtifact read_responses_artifact(const std::filesystem::path& path,
                                          const std::vector<Sample>& samples);

void write_traces_artifact(const std::filesystem::path& path, const std::vector<Sample>& samples,
                           const RefineStageResult& refined);

void write_report_artifact(const std::filesystem::path& path, const EvalReport& report,
                           const RunConfig& config);

// Appends one CSV row (config knobs + headline metrics) for sweep tables;
// writes the header when the file does not exist yet.
void append_report_csv(const std::filesystem::path& path, const EvalReport& report,
                       const RunConfig& config);

// ---------------------------------------------------------------------------
// Parallel map helper

// Runs fn(0..n-1) on `workers` threads. Exceptions are collected and the one
// with the smallest index is rethrown after all workers join, prefixed with
// `label` plus the per-item name from `item_name` on stderr for every failed
// index.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn,
                  const std::string& label,
                  const std::function<std::string(std::size_t)>& item_name);

}  // namespace msrag
