// Python bindings for the msrag core: corpus loading, planning, retrieval,
// label math, prompt assembly, refinement, and the evaluation metrics. The
// orchestration pipeline itself stays behind the CLI; these bindings expose
// the operations it is built from.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <set>
#include <sstream>

#include "msrag/corpus.hpp"
#include "msrag/evalkit.hpp"
#include "msrag/labels.hpp"
#include "msrag/planner.hpp"
#include "msrag/reader.hpp"
#include "msrag/refine.hpp"
#include "msrag/retrieval.hpp"

namespace py = pybind11;
using namespace msrag;

PYBIND11_MODULE(_msrag, m) {
    m.doc() = "Multi-source retrieval, planning, and refinement core";

    // --- exceptions ---------------------------------------------------------
    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
    py::register_exception<ProviderError>(m, "ProviderError", base.ptr());
    py::register_exception<ChainError>(m, "ChainError", base.ptr());

    // --- identities and scores ----------------------------------------------
    py::class_<SourceId>(m, "SourceId")
        .def(py::init<std::string>(), py::arg("name"))
        .def_property_readonly("name", &SourceId::name)
        .def("__eq__", [](const SourceId& a, const SourceId& b) { return a == b; })
        .def("__hash__", [](const SourceId& s) { return py::hash(py::str(s.name())); })
        .def("__repr__",
             [](const SourceId& s) { return "SourceId('" + std::string(s.name()) + "')"; });

    py::class_<RelevanceScore>(m, "RelevanceScore")
        .def(py::init<>())
        .def_static("from_tenths", &RelevanceScore::from_tenths, py::arg("tenths"))
        .def_static("from_token", &RelevanceScore::from_token, py::arg("token"))
        .def_property_readonly("tenths", &RelevanceScore::tenths)
        .def_property_readonly("value", &RelevanceScore::value)
        .def("token", &RelevanceScore::token)
        .def("__eq__", [](RelevanceScore a, RelevanceScore b) { return a == b; })
        .def("__lt__", [](RelevanceScore a, RelevanceScore b) { return a < b; })
        .def("__hash__", [](RelevanceScore s) { return s.tenths(); })
        .def("__repr__", [](RelevanceScore s) { return "RelevanceScore(" + s.token() + ")"; });

    m.def("quantize_score", &quantize_score, py::arg("x"),
          "Nearest similarity-grid value with half-up ties; x must be in [0, 1].");

    py::enum_<ScorerKind>(m, "ScorerKind")
        .value("bm25", ScorerKind::bm25)
        .value("dense", ScorerKind::dense)
        .value("llm", ScorerKind::llm)
        .value("self_eval", ScorerKind::self_eval)
        .value("hard", ScorerKind::hard)
        .value("oracle", ScorerKind::oracle);

    py::class_<Evidence>(m, "Evidence")
        .def(py::init([](std::string id, SourceId source, std::string text, std::string parent) {
                 return Evidence{std::move(id), std::move(source), std::move(text),
                                 std::move(parent)};
             }),
             py::arg("id"), py::arg("source"), py::arg("text"), py::arg("parent") = "")
        .def_readwrite("id", &Evidence::id)
        .def_readwrite("source", &Evidence::source)
        .def_readwrite("text", &Evidence::text)
        .def_readwrite("parent", &Evidence::parent)
        .def("__eq__", [](const Evidence& a, const Evidence& b) { return a == b; })
        .def("__repr__", [](const Evidence& e) { return "Evidence('" + e.id + "')"; });

    py::class_<ScoredEvidence>(m, "ScoredEvidence")
        .def(py::init([](Evidence evidence, RelevanceScore score, ScorerKind scorer) {
                 return ScoredEvidence{std::move(evidence), score, scorer};
             }),
             py::arg("evidence"), py::arg("score"), py::arg("scorer") = ScorerKind::bm25)
        .def_readwrite("evidence", &ScoredEvidence::evidence)
        .def_readwrite("score", &ScoredEvidence::score)
        .def_readwrite("scorer", &ScoredEvidence::scorer);

    // --- dialogue -------------------------------------------------------------
    py::enum_<Role>(m, "Role").value("user", Role::user).value("system", Role::system);

    py::class_<Turn>(m, "Turn")
        .def(py::init([](Role role, std::string text) { return Turn{role, std::move(text)}; }),
             py::arg("role"), py::arg("text"))
        .def_readwrite("role", &Turn::role)
        .def_readwrite("text", &Turn::text);

    py::class_<DialogueContext>(m, "DialogueContext")
        .def(py::init<std::vector<Turn>>(), py::arg("turns"))
        .def_property_readonly("turns", &DialogueContext::turns)
        .def("render_context",
             [](const DialogueContext& context) { return render_context(context); })
        .def("context_query_text",
             [](const DialogueContext& context) { return context_query_text(context); });

    // --- registry and plans ----------------------------------------------------
    py::class_<SourceRegistry>(m, "SourceRegistry")
        .def(py::init<>())
        .def("add_source", &SourceRegistry::add_source, py::arg("source"), py::arg("docs"),
             py::arg("depends_on") = std::vector<SourceId>{})
        .def("__len__", &SourceRegistry::size)
        .def_property_readonly("sources", &SourceRegistry::sources)
        .def("has_source", &SourceRegistry::has_source, py::arg("source"))
        .def("docs", &SourceRegistry::docs, py::arg("source"))
        .def("depends_on", &SourceRegistry::depends_on, py::arg("source"))
        .def("validate", &SourceRegistry::validate)
        .def("topological_order", &SourceRegistry::topological_order);

    py::class_<Plan>(m, "Plan")
        .def(py::init([](std::vector<SourceId> ordered) { return Plan{std::move(ordered)}; }),
             py::arg("ordered") = std::vector<SourceId>{})
        .def_readwrite("ordered", &Plan::ordered)
        .def("is_null", &Plan::is_null)
        .def("contains", &Plan::contains, py::arg("source"))
        .def("__len__", &Plan::size)
        .def("__eq__", [](const Plan& a, const Plan& b) { return a == b; })
        .def("__repr__", [](const Plan& p) { return serialize_plan(p); });

    py::class_<ParsedPlan>(m, "ParsedPlan")
        .def_readonly("plan", &ParsedPlan::plan)
        .def_readonly("dropped", &ParsedPlan::dropped);

    py::class_<PlanViolation> violation(m, "PlanViolation");
    py::enum_<PlanViolation::Kind>(violation, "Kind")
        .value("missing_dependency", PlanViolation::Kind::missing_dependency)
        .value("misordered_dependency", PlanViolation::Kind::misordered_dependency)
        .value("duplicate_source", PlanViolation::Kind::duplicate_source)
        .value("unknown_source", PlanViolation::Kind::unknown_source);
    violation.def_readonly("kind", &PlanViolation::kind)
        .def_readonly("source", &PlanViolation::source)
        .def_readonly("dependency", &PlanViolation::dependency)
        .def("__repr__", &PlanViolation::to_string);

    m.def("serialize_plan", &serialize_plan, py::arg("plan"));
    m.def(
        "parse_plan",
        [](const std::string& text, const SourceRegistry& registry) {
            return parse_plan(text, registry);
        },
        py::arg("text"), py::arg("registry"));
    m.def("validate_plan", &validate_plan, py::arg("plan"), py::arg("registry"));

    // --- corpus ------------------------------------------------------------------
    py::class_<Sample>(m, "Sample")
        .def_readonly("id", &Sample::id)
        .def_readonly("context", &Sample::context)
        .def_readonly("registry", &Sample::registry)
        .def_readonly("label_plan", &Sample::label_plan)
        .def_readonly("label_evidence", &Sample::label_evidence)
        .def_readonly("reference_response", &Sample::reference_response)
        .def("gold_ids", &Sample::gold_ids, py::arg("source"));

    m.def("load_corpus", &load_corpus, py::arg("path"));

    py::class_<CorpusStats>(m, "CorpusStats")
        .def_readonly("n_samples", &CorpusStats::n_samples)
        .def_readonly("plan_histogram", &CorpusStats::plan_histogram)
        .def_readonly("pct_with_source", &CorpusStats::pct_with_source);
    m.def("corpus_stats", &corpus_stats, py::arg("samples"));

    // --- providers ------------------------------------------------------------------
    py::class_<GenParams>(m, "GenParams")
        .def(py::init<>())
        .def_readwrite("temperature", &GenParams::temperature)
        .def_readwrite("top_p", &GenParams::top_p)
        .def_readwrite("max_tokens", &GenParams::max_tokens);

    py::class_<ChatProvider>(m, "ChatProvider");
    py::class_<ScriptedChatProvider, ChatProvider>(m, "ScriptedChatProvider")
        .def(py::init([]() { return new ScriptedChatProvider(); }))
        .def("script", &ScriptedChatProvider::script, py::arg("prompt"), py::arg("reply"))
        .def("set_default_reply", &ScriptedChatProvider::set_default_reply, py::arg("reply"))
        .def("call_count", &ScriptedChatProvider::call_count);

    py::class_<EmbeddingVector>(m, "EmbeddingVector")
        .def(py::init([](std::vector<double> values) { return EmbeddingVector{std::move(values)}; }),
             py::arg("values"))
        .def_readonly("values", &EmbeddingVector::values);

    py::class_<EmbeddingProvider>(m, "EmbeddingProvider");
    py::class_<HashEmbeddingProvider, EmbeddingProvider>(m, "HashEmbeddingProvider")
        .def(py::init<std::uint64_t, std::size_t>(), py::arg("seed") = 0, py::arg("dim") = 64)
        .def("embed", &HashEmbeddingProvider::embed, py::arg("text"))
        .def("dimension", &HashEmbeddingProvider::dimension);

    m.def("cosine_sim", &cosine_sim, py::arg("a"), py::arg("b"));

    py::class_<NliProvider>(m, "NliProvider")
        .def("entail", &NliProvider::entail, py::arg("premise"), py::arg("hypothesis"));
    py::class_<ConstantNliProvider, NliProvider>(m, "ConstantNliProvider")
        .def(py::init<double>(), py::arg("value"));
    py::class_<ScriptedNliProvider, NliProvider>(m, "ScriptedNliProvider")
        .def(py::init<>())
        .def("script", &ScriptedNliProvider::script, py::arg("premise"), py::arg("hypothesis"),
             py::arg("value"));
    py::class_<OverlapNliProvider, NliProvider>(m, "OverlapNliProvider").def(py::init<>());

    // --- retrieval -----------------------------------------------------------------
    py::class_<Bm25Params>(m, "Bm25Params")
        .def(py::init([](double k1, double b) { return Bm25Params{k1, b}; }), py::arg("k1") = 1.2,
             py::arg("b") = 0.75)
        .def_readwrite("k1", &Bm25Params::k1)
        .def_readwrite("b", &Bm25Params::b);

    py::class_<EvidenceScorer>(m, "EvidenceScorer")
        .def("score_pool", &EvidenceScorer::score_pool, py::arg("query"), py::arg("pool"))
        .def_property_readonly("kind", &EvidenceScorer::kind);
    py::class_<Bm25Scorer, EvidenceScorer>(m, "Bm25Scorer")
        .def(py::init([](Bm25Params params) { return new Bm25Scorer(params); }),
             py::arg("params") = Bm25Params{});

    m.def("retrieve_topk", &retrieve_topk, py::arg("query"), py::arg("pool"), py::arg("scorer"),
          py::arg("top_n"));

    // --- label math -------------------------------------------------------------------
    py::class_<ContrastiveBatch>(m, "ContrastiveBatch")
        .def(py::init([](double positive, std::vector<double> negatives, bool substitute_injected) {
                 return ContrastiveBatch{positive, std::move(negatives), substitute_injected};
             }),
             py::arg("positive"), py::arg("negatives"), py::arg("substitute_injected") = false)
        .def_readwrite("positive", &ContrastiveBatch::positive)
        .def_readwrite("negatives", &ContrastiveBatch::negatives)
        .def_readwrite("substitute_injected", &ContrastiveBatch::substitute_injected);

    m.def("nll_loss", &nll_loss, py::arg("batch"));
    m.def("build_batch", &build_batch, py::arg("scored"), py::arg("gold_id"),
          py::arg("fallback_negatives") = std::vector<double>{});

    py::class_<LabelCacheEntry>(m, "LabelCacheEntry")
        .def(py::init([](std::string sample_id, std::string evidence_id, RelevanceScore score,
                         ScorerKind scorer, std::string model, std::string timestamp) {
                 return LabelCacheEntry{std::move(sample_id), std::move(evidence_id), score,
                                        scorer, std::move(model), std::move(timestamp)};
             }),
             py::arg("sample_id"), py::arg("evidence_id"), py::arg("score"),
             py::arg("scorer") = ScorerKind::llm, py::arg("model") = "",
             py::arg("timestamp") = "")
        .def_readonly("sample_id", &LabelCacheEntry::sample_id)
        .def_readonly("evidence_id", &LabelCacheEntry::evidence_id)
        .def_readonly("score", &LabelCacheEntry::score)
        .def_readonly("scorer", &LabelCacheEntry::scorer)
        .def_readonly("model", &LabelCacheEntry::model)
        .def_readonly("timestamp", &LabelCacheEntry::timestamp);

    py::class_<LabelCache>(m, "LabelCache")
        .def(py::init<>())
        .def_static("load", &LabelCache::load, py::arg("path"))
        .def("put", &LabelCache::put, py::arg("entry"),
             py::arg("path") = std::optional<std::filesystem::path>{})
        .def(
            "lookup",
            [](const LabelCache& cache, const std::string& sample_id,
               const std::string& evidence_id,
               ScorerKind scorer) -> std::optional<LabelCacheEntry> {
                const LabelCacheEntry* entry = cache.lookup(sample_id, evidence_id, scorer);
                if (!entry) return std::nullopt;
                return *entry;
            },
            py::arg("sample_id"), py::arg("evidence_id"), py::arg("scorer"))
        .def("__len__", &LabelCache::size)
        .def("entries", &LabelCache::entries);

    // --- prompt assembly -----------------------------------------------------------------
    py::enum_<SegmentKind>(m, "SegmentKind")
        .value("context", SegmentKind::context)
        .value("source_header", SegmentKind::source_header)
        .value("evidence", SegmentKind::evidence)
        .value("sim", SegmentKind::sim)
        .value("response_slot", SegmentKind::response_slot);

    py::class_<Segment>(m, "Segment")
        .def_readonly("kind", &Segment::kind)
        .def_readonly("index", &Segment::index)
        .def_readonly("begin", &Segment::begin)
        .def_readonly("end", &Segment::end);

    py::class_<AssembledPrompt>(m, "AssembledPrompt")
        .def_readonly("text", &AssembledPrompt::text)
        .def_readonly("segments", &AssembledPrompt::segments);

    py::class_<AttentionMask>(m, "AttentionMask")
        .def("__len__", &AttentionMask::size)
        .def("allowed", &AttentionMask::allowed, py::arg("row"), py::arg("col"))
        .def("pure_causal", &AttentionMask::pure_causal);

    m.def("shuffle_evidence", &shuffle_evidence, py::arg("evidences"), py::arg("seed"));
    m.def("assemble_input", &assemble_input, py::arg("context"), py::arg("plan"),
          py::arg("evidences"));
    m.def("build_attention_mask", &build_attention_mask, py::arg("prompt"));
    m.def("generate_response", &generate_response, py::arg("prompt"), py::arg("chat"),
          py::arg("params") = GenParams{});

    py::class_<TrainingRecord>(m, "TrainingRecord")
        .def_readonly("input", &TrainingRecord::input)
        .def_readonly("target", &TrainingRecord::target)
        .def_readonly("full", &TrainingRecord::full)
        .def_readonly("mask", &TrainingRecord::mask)
        .def("to_json_text", [](const TrainingRecord& r) { return r.to_json().dump(); });

    m.def("emit_training_record", &emit_training_record, py::arg("sample"), py::arg("cache"),
          py::arg("label_scorer"), py::arg("seed"));

    // --- planning ---------------------------------------------------------------------
    py::enum_<PlannerBackend>(m, "PlannerBackend")
        .value("llm_zero_shot", PlannerBackend::llm_zero_shot)
        .value("llm_icl", PlannerBackend::llm_icl)
        .value("oracle", PlannerBackend::oracle)
        .value("always_all", PlannerBackend::always_all)
        .value("always_null", PlannerBackend::always_null);

    py::enum_<PlannerFallback>(m, "PlannerFallback")
        .value("null", PlannerFallback::null)
        .value("error", PlannerFallback::error);

    py::class_<Demonstration>(m, "Demonstration")
        .def(py::init([](DialogueContext context, Plan plan) {
                 return Demonstration{std::move(context), std::move(plan)};
             }),
             py::arg("context"), py::arg("plan"))
        .def_readwrite("context", &Demonstration::context)
        .def_readwrite("plan", &Demonstration::plan);

    py::class_<PlannerConfig>(m, "PlannerConfig")
        .def(py::init<>())
        .def_readwrite("backend", &PlannerConfig::backend)
        .def_readwrite("demonstrations", &PlannerConfig::demonstrations)
        .def_readwrite("fallback", &PlannerConfig::fallback)
        .def_readwrite("template_text", &PlannerConfig::template_text)
        .def_readwrite("gen", &PlannerConfig::gen);

    py::class_<PlanResult>(m, "PlanResult")
        .def_readonly("plan", &PlanResult::plan)
        .def_readonly("raw_output", &PlanResult::raw_output)
        .def_readonly("fallback_used", &PlanResult::fallback_used)
        .def_readonly("dropped", &PlanResult::dropped)
        .def_readonly("violations", &PlanResult::violations);

    m.def("plan_sources", &plan_sources, py::arg("context"), py::arg("registry"),
          py::arg("config"), py::arg("chat") = nullptr, py::arg("oracle_plan") = nullptr);

    // --- metrics --------------------------------------------------------------------------
    py::enum_<TokenizeMode>(m, "TokenizeMode")
        .value("whitespace", TokenizeMode::whitespace)
        .value("char_cjk", TokenizeMode::char_cjk);

    m.def(
        "tokenize",
        [](const std::string& text, TokenizeMode mode) { return tokenize(text, mode); },
        py::arg("text"), py::arg("mode") = TokenizeMode::char_cjk);

    py::class_<ClassScheme>(m, "ClassScheme")
        .def(py::init([](std::map<std::string, std::string> classes) {
                 return ClassScheme{std::move(classes)};
             }),
             py::arg("classes") = std::map<std::string, std::string>{})
        .def_readwrite("classes", &ClassScheme::classes)
        .def("classify", &ClassScheme::classify, py::arg("plan"));

    py::class_<F1Stats>(m, "F1Stats")
        .def_readonly("precision", &F1Stats::precision)
        .def_readonly("recall", &F1Stats::recall)
        .def_readonly("f1", &F1Stats::f1)
        .def_readonly("tp", &F1Stats::tp)
        .def_readonly("fp", &F1Stats::fp)
        .def_readonly("fn", &F1Stats::fn)
        .def_readonly("support", &F1Stats::support);

    m.def("f1_per_class", &f1_per_class, py::arg("predicted"), py::arg("gold"),
          py::arg("scheme") = ClassScheme{});
    m.def("bleu1", &bleu1, py::arg("candidate"), py::arg("reference"),
          py::arg("mode") = TokenizeMode::char_cjk);
    m.def("rouge_l", &rouge_l, py::arg("candidate"), py::arg("reference"),
          py::arg("mode") = TokenizeMode::char_cjk);

    py::class_<ConsistencyResult>(m, "ConsistencyResult")
        .def_readonly("percentage", &ConsistencyResult::percentage)
        .def_readonly("n_pairs", &ConsistencyResult::n_pairs)
        .def_readonly("n_consistent", &ConsistencyResult::n_consistent);
    m.def("consistency_rate", &consistency_rate, py::arg("pairs"), py::arg("nli"),
          py::arg("threshold") = 0.5);

    // --- refinement -------------------------------------------------------------------------
    py::class_<CombinedScores>(m, "CombinedScores")
        .def_readonly("nli", &CombinedScores::nli)
        .def_readonly("ce", &CombinedScores::ce)
        .def_readonly("combined", &CombinedScores::combined);
    m.def("combined_scores", &combined_scores, py::arg("evidences"), py::arg("response"),
          py::arg("nli"));
    m.def("select_updates", &select_updates, py::arg("combined"), py::arg("alpha"));

    py::class_<RefinementConfig>(m, "RefinementConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &RefinementConfig::alpha)
        .def_readwrite("steps", &RefinementConfig::steps)
        .def_readwrite("skip_on_null", &RefinementConfig::skip_on_null)
        .def_readwrite("gen", &RefinementConfig::gen);

    py::class_<PassTrace>(m, "PassTrace")
        .def_readonly("nli", &PassTrace::nli)
        .def_readonly("ce", &PassTrace::ce)
        .def_readonly("combined", &PassTrace::combined)
        .def_readonly("evicted_ids", &PassTrace::evicted_ids)
        .def_readonly("injected_ids", &PassTrace::injected_ids)
        .def_readonly("exhausted_sources", &PassTrace::exhausted_sources)
        .def_readonly("alpha_clamped", &PassTrace::alpha_clamped)
        .def_readonly("response", &PassTrace::response)
        .def("to_json_text", [](const PassTrace& t) { return t.to_json().dump(); });

    py::class_<RefineOutcome>(m, "RefineOutcome")
        .def_readonly("evidences", &RefineOutcome::evidences)
        .def_readonly("response", &RefineOutcome::response)
        .def_readonly("trace", &RefineOutcome::trace);

    py::class_<MultiOutcome>(m, "MultiOutcome")
        .def_readonly("evidences", &MultiOutcome::evidences)
        .def_readonly("response", &MultiOutcome::response)
        .def_readonly("traces", &MultiOutcome::traces);

    // History is taken by value and handed back so python callers see the
    // grown set without reference-semantics surprises.
    m.def(
        "refine_once",
        [](const DialogueContext& context, const Plan& plan,
           const std::vector<ScoredEvidence>& evidences, const std::string& response,
           ChatProvider& chat, NliProvider& nli, const EvidenceRanker& ranker,
           const RefinementConfig& config, std::set<std::string> history) {
            RefineOutcome outcome =
                refine_once(context, plan, evidences, response, chat, nli, ranker, config, history);
            return py::make_tuple(std::move(outcome), std::move(history));
        },
        py::arg("context"), py::arg("plan"), py::arg("evidences"), py::arg("response"),
        py::arg("chat"), py::arg("nli"), py::arg("ranker"), py::arg("config"),
        py::arg("history"));

    m.def("refine_multi", &refine_multi, py::arg("context"), py::arg("plan"),
          py::arg("evidences"), py::arg("response"), py::arg("chat"), py::arg("nli"),
          py::arg("ranker"), py::arg("config"));

    // --- wire tokens --------------------------------------------------------------------------
    m.attr("SOURCE_BEGIN") = std::string(tokens::kSourceBegin);
    m.attr("SOURCE_END") = std::string(tokens::kSourceEnd);
    m.attr("EVIDENCE_BEGIN") = std::string(tokens::kEvidenceBegin);
    m.attr("EVIDENCE_END") = std::string(tokens::kEvidenceEnd);
    m.attr("NULL_DECISION") = std::string(tokens::kNull);
}
