// msrag: orchestration and evaluation for multi-source retrieval-augmented
// dialogue. Each subcommand runs one pipeline stage (or the whole pipeline)
// and writes fixed-name artifacts under --out-dir. Exit codes: 0 success,
// 1 provider/runtime failure (with a per-sample error log on stderr),
// 2 configuration/schema problems.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msrag/pipeline.hpp"
#include "msrag/reader.hpp"

namespace {

using namespace msrag;

struct CliFlags {
    std::string corpus;
    std::string out_dir = "out";
    std::string labels_file;
    std::string plans_file;
    std::string responses_file;
    std::string report_csv;

    std::string planner = "llm-zero-shot";
    std::string fallback = "null";
    std::string planning_template;
    std::vector<std::string> demo_samples;

    std::string scorer = "bm25";
    int top_n = 1;
    std::string dependency_mode = "augment";
    std::string relevance_template;

    std::string label_scorer = "llm";
    std::string label_model;

    int k = 1;
    int alpha = 1;
    int steps = 1;
    bool skip_on_null = true;
    std::string generator = "llm";
    std::string grounding = "gold";
    std::string grouping = "class-source";
    double nli_threshold = 0.5;
    std::vector<std::string> source_roles;
    std::vector<std::string> class_map;

    double temperature = 0.1;
    double top_p = 0.1;
    int max_tokens = 512;

    int parallelism = 1;
    std::uint64_t seed = 0;

    std::string chat_kind = "mock";
    std::string embed_kind = "mock";
    std::string nli_kind = "overlap";
    ProviderConfig chat_http;
    ProviderConfig embed_http;
    ProviderConfig nli_http;
    std::string chat_mock_reply = "OK.";
    double nli_constant = 1.0;
    std::uint64_t embed_seed = 0;
    std::size_t embed_dim = 64;

    std::string repl_sample;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::pair<std::string, std::string> split_kv(const std::string& spec, const char* flag) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
        throw ConfigError(std::string(flag) + " expects KEY=VALUE, got: " + spec);
    }
    return {spec.substr(0, eq), spec.substr(eq + 1)};
}

RunConfig to_run_config(const CliFlags& f) {
    if (f.parallelism < 1) throw ConfigError("--parallelism must be >= 1");
    if (f.top_n < 1) throw ConfigError("--top-n must be >= 1");
    if (f.k < 1) throw ConfigError("--k must be >= 1");
    if (f.alpha < 1) throw ConfigError("--alpha must be >= 1");
    if (f.steps < 1) throw ConfigError("--steps must be >= 1");

    RunConfig cfg;
    cfg.corpus = f.corpus;
    cfg.out_dir = f.out_dir;
    cfg.labels_file = f.labels_file;

    cfg.providers.chat_kind = f.chat_kind;
    cfg.providers.embed_kind = f.embed_kind;
    cfg.providers.nli_kind = f.nli_kind;
    cfg.providers.chat_http = f.chat_http;
    cfg.providers.embed_http = f.embed_http;
    cfg.providers.nli_http = f.nli_http;
    cfg.providers.chat_mock_reply = f.chat_mock_reply;
    cfg.providers.nli_constant = f.nli_constant;
    cfg.providers.embed_seed = f.embed_seed;
    cfg.providers.embed_dim = f.embed_dim;

    cfg.planner.backend = planner_backend_from_string(f.planner);
    cfg.planner.fallback = f.fallback == "error" ? PlannerFallback::error : PlannerFallback::null;
    if (!f.planning_template.empty()) {
        cfg.planner.template_text = read_file(f.planning_template);
    }

    cfg.retrieval.scorer = scorer_kind_from_string(f.scorer);
    cfg.retrieval.top_n = f.top_n;
    cfg.retrieval.dependency_mode =
        f.dependency_mode == "filter" ? DependencyMode::filter : DependencyMode::augment;
    if (!f.relevance_template.empty()) {
        std::string text = read_file(f.relevance_template);
        cfg.retrieval.relevance_template = text;
        cfg.labels.relevance_template = text;
    }

    cfg.labels.scorer = scorer_kind_from_string(f.label_scorer);
    if (!f.label_model.empty()) {
        cfg.labels.model = f.label_model;
    } else {
        cfg.labels.model = f.chat_http.model.empty() ? "mock" : f.chat_http.model;
    }

    cfg.refine.alpha = f.alpha;
    cfg.refine.steps = f.steps;
    cfg.refine.skip_on_null = f.skip_on_null;

    GenParams gen;
    gen.temperature = f.temperature;
    gen.top_p = f.top_p;
    gen.max_tokens = f.max_tokens;
    cfg.gen = gen;
    cfg.planner.gen = gen;
    cfg.refine.gen = gen;

    cfg.generator = f.generator;
    cfg.eval.k = f.k;
    cfg.eval.nli_threshold = f.nli_threshold;
    cfg.eval.grounding = f.grounding;
    cfg.eval.recall_grouping = f.grouping;
    for (const std::string& spec : f.source_roles) {
        auto [name, role] = split_kv(spec, "--source-role");
        if (role != "persona" && role != "knowledge" && role != "ignore") {
            throw ConfigError("--source-role role must be persona|knowledge|ignore: " + spec);
        }
        cfg.eval.source_roles[name] = role;
    }
    for (const std::string& spec : f.class_map) {
        auto [signature, label] = split_kv(spec, "--class-map");
        cfg.eval.scheme.classes[signature] = label;
    }

    cfg.parallelism = f.parallelism;
    cfg.seed = f.seed;
    return cfg;
}

// llm-icl demonstrations are drawn from corpus samples by id.
void apply_demonstrations(RunConfig& cfg, const std::vector<Sample>& samples,
                          const std::vector<std::string>& demo_ids) {
    for (const std::string& id : demo_ids) {
        auto it = std::find_if(samples.begin(), samples.end(),
                               [&id](const Sample& s) { return s.id == id; });
        if (it == samples.end()) {
            throw ConfigError("--demo-sample id not in corpus: " + id);
        }
        cfg.planner.demonstrations.push_back({it->context, it->label_plan});
    }
}

std::set<std::string> sample_gold_ids(const Sample& sample) {
    std::set<std::string> out;
    for (const auto& [source, ids] : sample.label_evidence) {
        out.insert(ids.begin(), ids.end());
    }
    return out;
}

SampleRetrieval regroup_by_source(const std::vector<ScoredEvidence>& flat) {
    SampleRetrieval out;
    for (const ScoredEvidence& item : flat) {
        out[item.evidence.source.name()].push_back(item);
    }
    return out;
}

std::vector<Plan> plans_of(const std::vector<PlanResult>& results) {
    std::vector<Plan> plans;
    plans.reserve(results.size());
    for (const PlanResult& r : results) plans.push_back(r.plan);
    return plans;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_stats(const RunConfig& cfg) {
    std::vector<Sample> samples = load_samples_sorted(cfg.corpus);
    CorpusStats stats = corpus_stats(samples);
    write_stats_artifact(cfg.out_dir / "stats.json", stats);
    std::cout << stats.to_json().dump(2) << '\n';
    return 0;
}

int cmd_label(const RunConfig& cfg) {
    std::vector<Sample> samples = load_samples_sorted(cfg.corpus);
    ProviderBundle bundle = make_providers(cfg.providers);
    std::filesystem::path path = cfg.labels_path();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    LabelCache cache = LabelCache::load(path);
    PrecomputeSummary summary =
        precompute_labels(samples, cfg.labels, bundle.handles(), cache, path);
    std::cout << "labels: " << summary.n_new << " new, " << summary.n_cached << " cached, "
              << summary.n_failed << " failed -> " << path.string() << '\n';
    for (const std::string& failure : summary.failures) {
        std::cerr << "label failure: " << failure << '\n';
    }
    return summary.n_failed == 0 ? 0 : 1;
}

int cmd_plan_eval(RunConfig cfg, const std::vector<std::string>& demo_ids) {
    std::vector<Sample> samples = load_samples_sorted(cfg.corpus);
    apply_demonstrations(cfg, samples, demo_ids);
    ProviderBundle bundle = make_providers(cfg.providers);
    std::vector<PlanResult> results = run_plan_stage(samples, cfg, bundle.handles());
    write_plans_artifact(cfg.out_dir / "plans.jsonl", samples, results);

    std::vector<Plan> predicted = plans_of(results);
    std::vector<Plan> gold;
    gold.reserve(samples.size());
    for (const Sample& sample : samples) gold.push_back(sample.label_plan);
    std::map<std::string, F1Stats> f1 = f1_per_class(predicted, gold, cfg.eval.scheme);

    std::cout << "class\tprecision\trecall\tf1\tsupport\n";
    for (const auto& [label, stats] : f1) {
        std::cout << label << '\t' << stats.precision << '\t' << stats.recall << '\t' << stats.f1
                  << '\t' << stats.support << '\n';
    }
    return 0;
}

int cmd_retrieve_eval(const RunConfig& cfg) {
    std::vector<Sample> samples = load_samples_sorted(cfg.corpus);
    ProviderBundle bundle = make_providers(cfg.providers);
    RecallEval recall = run_recall_eval(samples, cfg, bundle.handles());
    write_retrieval_artifact(cfg.out_dir / "retrieval.json", recall, cfg);

    std::cout << "group\trecall@" << cfg.eval.k << "\tn\n";
    for (const auto& [label, result] : recall.groups) {
        std::cout << label << '\t' << result.mean << '\t' << result.n_evaluated << '\n';
    }
    std::cout << "skipped\t-\t" << recall.n_skipped << '\n';
    return 0;
}

int cmd_generate(RunConfig cfg, const CliFlags& flags) {
    std::vector<Sample> samples = load_samples_sorted(cfg.corpus);
    apply_demonstrations(cfg, samples, flags.demo_samples);
    ProviderBundle bundle = make_providers(cfg.providers);
    ProviderHandles handles = bundle.handles();

    std::vector<Plan> plans;
    if (!flags.plans_file.empty()) {
        plans = read_plans_artifact(flags.plans_file, samples);
    } else {
        std::vector<PlanResult> results = run_plan_stage(samples, cfg, handles);
        write_plans_artifact(cfg.out_dir / "plans.jsonl", samples, results);
        plans = plans_of(results);
    }
    std::vector<SampleRetrieval> retrievals = run_retrieve_stage(samples, plans, cfg, handles);
    std::vector<std::string> responses =
        run_generate_stage(samples, plans, retrievals, cfg, handles);
    write_responses_artifact(cfg.out_dir / "responses.jsonl", samples, plans, retrievals,
                             responses);
    std::cout << "generated " << responses.size() << " responses -> "
              << (cfg.out_dir / "responses.jsonl").string() << '\n';
    return 0;
}

int cmd_refine(const RunConfig& cfg, const CliFlags& flags) {
    std::vector<Sample> samples = load_samples_sorted(cfg.corpus);
    ProviderBundle bundle = make_providers(cfg.providers);
    ProviderHandles handles = bundle.handles();

    std::filesystem::path responses_path = flags.responses_file.empty()
                                               ? cfg.out_dir / "responses.jsonl"
                                               : std::filesystem::path(flags.responses_file);
    ResponsesArtifact art = read_responses_artifact(responses_path, samples);
    RefineStageResult refined =
        run_refine_stage(samples, art.plans, art.retrievals, art.responses, cfg, handles);

    std::vector<SampleRetrieval> final_retrievals(samples.size());
    std::size_t n_passes = 0, n_evicted = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        final_retrievals[i] = refined.evidences[i].empty() ? art.retrievals[i]
                                                           : regroup_by_source(refined.evidences[i]);
        n_passes += refined.traces[i].size();
        for (const PassTrace& trace : refined.traces[i]) n_evicted += trace.evicted_ids.size();
    }
    write_responses_artifact(cfg.out_dir / "responses.jsonl", samples, art.plans, final_retrievals,
                             refined.responses);
    write_traces_artifact(cfg.out_dir / "traces.jsonl", samples, refined);
    std::cout << "refined " << samples.size() << " responses (" << n_passes << " passes, "
              << n_evicted << " evictions) -> " << (cfg.out_dir / "traces.jsonl").string() << '\n';
    return 0;
}

int cmd_eval(RunConfig cfg, const CliFlags& flags) {
    std::vector<Sample> samples = load_samples_sorted(cfg.corpus);
    apply_demonstrations(cfg, samples, flags.demo_samples);
    ProviderBundle bundle = make_providers(cfg.providers);
    ProviderHandles handles = bundle.handles();

    std::vector<Plan> plans;
    std::vector<SampleRetrieval> retrievals;
    std::vector<std::string> responses;
    if (!flags.responses_file.empty()) {
        ResponsesArtifact art = read_responses_artifact(flags.responses_file, samples);
        plans = std::move(art.plans);
        retrievals = std::move(art.retrievals);
        responses = std::move(art.responses);
    } else {
        if (!flags.plans_file.empty()) {
            plans = read_plans_artifact(flags.plans_file, samples);
        } else {
            std::vector<PlanResult> results = run_plan_stage(samples, cfg, handles);
            write_plans_artifact(cfg.out_dir / "plans.jsonl", samples, results);
            plans = plans_of(results);
        }
        retrievals = run_retrieve_stage(samples, plans, cfg, handles);
        responses = run_generate_stage(samples, plans, retrievals, cfg, handles);
        write_responses_artifact(cfg.out_dir / "responses.jsonl", samples, plans, retrievals,
                                 responses);
    }

    EvalReport report = evaluate(samples, plans, retrievals, responses, cfg, handles);
    write_report_artifact(cfg.out_dir / "report.json", report, cfg);
    if (!flags.report_csv.empty()) {
        append_report_csv(flags.report_csv, report, cfg);
    }
    std::cout << report.to_json().dump(2) << '\n';
    return 0;
}

int cmd_repl(RunConfig cfg, const CliFlags& flags) {
    std::vector<Sample> samples = load_samples_sorted(cfg.corpus);
    apply_demonstrations(cfg, samples, flags.demo_samples);
    const Sample* sample = &samples.front();
    if (!flags.repl_sample.empty()) {
        auto it = std::find_if(samples.begin(), samples.end(), [&flags](const Sample& s) {
            return s.id == flags.repl_sample;
        });
        if (it == samples.end()) {
            throw ConfigError("--sample id not in corpus: " + flags.repl_sample);
        }
        sample = &*it;
    }
    ProviderBundle bundle = make_providers(cfg.providers);
    ProviderHandles handles = bundle.handles();
    std::set<std::string> gold = sample_gold_ids(*sample);

    std::cout << "sample " << sample->id << "; sources:";
    for (const SourceId& source : sample->registry.sources()) {
        std::cout << ' ' << source.name() << '(' << sample->registry.docs(source).size() << ')';
    }
    std::cout << "\ntype a user turn (empty line or /quit to exit)\n";

    std::vector<Turn> turns;
    std::string line;
    for (;;) {
        std::cout << "user> " << std::flush;
        if (!std::getline(std::cin, line)) break;
        if (line.empty() || line == "/quit") break;
        turns.push_back({Role::user, line});
        DialogueContext context{turns};

        PlanResult plan_result =
            plan_sources(context, sample->registry, cfg.planner, handles.chat,
                         &sample->label_plan);
        std::cout << "plan: " << serialize_plan(plan_result.plan)
                  << (plan_result.fallback_used ? "  (fallback)" : "") << '\n';

        SampleRetrieval retrieval = retrieve_chain(context, plan_result.plan, sample->registry,
                                                   cfg.retrieval, handles, gold);
        for (const SourceId& source : plan_result.plan.ordered) {
            for (const ScoredEvidence& item : retrieval.at(source.name())) {
                std::cout << "  [" << item.score.token() << "] " << item.evidence.id << "  "
                          << item.evidence.text << '\n';
            }
        }

        std::vector<ScoredEvidence> evidences = flatten_evidence(plan_result.plan, retrieval);
        std::string response;
        if (cfg.generator == "reference") {
            response = sample->reference_response;
        } else {
            AssembledPrompt prompt = assemble_input(context, plan_result.plan, evidences);
            response = generate_response(prompt, *handles.chat, cfg.gen);
        }
        std::cout << "system> " << response << '\n';

        if (!plan_result.plan.is_null() && !evidences.empty()) {
            std::cout << "refine? [y/N] " << std::flush;
            std::string answer;
            if (std::getline(std::cin, answer) && (answer == "y" || answer == "Y")) {
                RetrievalConfig full_depth = cfg.retrieval;
                for (const SourceId& source : sample->registry.sources()) {
                    full_depth.top_n = std::max<int>(
                        full_depth.top_n,
                        static_cast<int>(sample->registry.docs(source).size()));
                }
                SampleRetrieval full = retrieve_chain(context, plan_result.plan, sample->registry,
                                                      full_depth, handles, gold);
                EvidenceRanker ranker = [&full](const DialogueContext&, const SourceId& source) {
                    auto it = full.find(source.name());
                    if (it == full.end()) {
                        throw ChainError("no ranking available for source " + source.name());
                    }
                    return it->second;
                };
                MultiOutcome outcome =
                    refine_multi(context, plan_result.plan, evidences, response, *handles.chat,
                                 *handles.nli, ranker, cfg.refine);
                for (const PassTrace& trace : outcome.traces) {
                    for (std::size_t j = 0; j < trace.evicted_ids.size(); ++j) {
                        std::cout << "  swap " << trace.evicted_ids[j] << " -> "
                                  << trace.injected_ids[j] << '\n';
                    }
                }
                response = outcome.response;
                std::cout << "system> " << response << '\n';
            }
        }
        turns.push_back({Role::system, response});
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-source retrieval-augmented dialogue pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "plain-text section/key config file (flags win)");

    CliFlags flags;
    app.add_option("--corpus", flags.corpus, "JSONL corpus path");
    app.add_option("--out-dir", flags.out_dir, "artifact output directory");
    app.add_option("--labels-file", flags.labels_file, "relevance label cache path");
    app.add_option("--plans-file", flags.plans_file, "read plans from this artifact");
    app.add_option("--responses-file", flags.responses_file, "read responses from this artifact");
    app.add_option("--report-csv", flags.report_csv, "append a summary row to this CSV");

    app.add_option("--planner", flags.planner, "source planner backend")
        ->check(CLI::IsMember(
            {"llm-zero-shot", "llm-icl", "oracle", "always-all", "always-null"}));
    app.add_option("--fallback", flags.fallback, "unparseable/invalid plan policy")
        ->check(CLI::IsMember({"null", "error"}));
    app.add_option("--planning-template", flags.planning_template, "planning prompt file");
    app.add_option("--demo-sample", flags.demo_samples,
                   "corpus sample id used as an in-context demonstration (repeatable)");

    app.add_option("--scorer", flags.scorer, "retrieval scorer")
        ->check(CLI::IsMember({"bm25", "dense", "llm", "hard", "oracle"}));
    app.add_option("--top-n", flags.top_n, "evidence retrieved per source");
    app.add_option("--dependency-mode", flags.dependency_mode,
                   "how prerequisite evidence is used")
        ->check(CLI::IsMember({"augment", "filter"}));
    app.add_option("--relevance-template", flags.relevance_template, "relevance prompt file");

    app.add_option("--label-scorer", flags.label_scorer, "precompute label scorer")
        ->check(CLI::IsMember({"llm", "dense", "hard"}));
    app.add_option("--label-model", flags.label_model, "model name recorded in the label cache");

    app.add_option("--k", flags.k, "recall cutoff");
    app.add_option("--alpha", flags.alpha, "evidences replaced per refinement pass");
    app.add_option("--steps", flags.steps, "max refinement passes");
    app.add_option("--skip-on-null", flags.skip_on_null,
                   "leave NULL-decision samples unrefined");
    app.add_option("--generator", flags.generator, "response generator")
        ->check(CLI::IsMember({"llm", "reference"}));
    app.add_option("--grounding", flags.grounding, "consistency grounding side")
        ->check(CLI::IsMember({"gold", "predicted"}));
    app.add_option("--recall-grouping", flags.grouping, "recall report grouping")
        ->check(CLI::IsMember({"source", "class-source"}));
    app.add_option("--nli-threshold", flags.nli_threshold, "consistency entailment threshold");
    app.add_option("--source-role", flags.source_roles,
                   "NAME=persona|knowledge|ignore consistency pool override (repeatable)");
    app.add_option("--class-map", flags.class_map,
                   "SIGNATURE=CLASS plan-class override (repeatable)");

    app.add_option("--temperature", flags.temperature, "generation temperature");
    app.add_option("--top-p", flags.top_p, "generation nucleus mass");
    app.add_option("--max-tokens", flags.max_tokens, "generation token cap");

    app.add_option("--parallelism", flags.parallelism, "sample-level worker count");
    app.add_option("--seed", flags.seed, "run seed recorded in reports");

    app.add_option("--chat.kind", flags.chat_kind, "chat provider")
        ->check(CLI::IsMember({"mock", "http"}));
    app.add_option("--chat.endpoint", flags.chat_http.endpoint, "chat API base URL");
    app.add_option("--chat.model", flags.chat_http.model, "chat model name");
    app.add_option("--chat.auth-env", flags.chat_http.auth_env,
                   "env var holding the chat API token");
    app.add_option("--chat.timeout", flags.chat_http.timeout_s, "chat request timeout (s)");
    app.add_option("--chat.retries", flags.chat_http.max_retries, "chat transient retry cap");
    app.add_option("--chat.backoff", flags.chat_http.backoff_s, "chat retry backoff base (s)");
    app.add_option("--chat.rps", flags.chat_http.requests_per_sec, "chat rate limit (req/s)");
    app.add_option("--chat.mock-reply", flags.chat_mock_reply, "mock chat default reply");

    app.add_option("--embed.kind", flags.embed_kind, "embedding provider")
        ->check(CLI::IsMember({"mock", "http"}));
    app.add_option("--embed.endpoint", flags.embed_http.endpoint, "embedding API base URL");
    app.add_option("--embed.model", flags.embed_http.model, "embedding model name");
    app.add_option("--embed.auth-env", flags.embed_http.auth_env,
                   "env var holding the embedding API token");
    app.add_option("--embed.timeout", flags.embed_http.timeout_s, "embedding request timeout (s)");
    app.add_option("--embed.retries", flags.embed_http.max_retries,
                   "embedding transient retry cap");
    app.add_option("--embed.backoff", flags.embed_http.backoff_s,
                   "embedding retry backoff base (s)");
    app.add_option("--embed.rps", flags.embed_http.requests_per_sec,
                   "embedding rate limit (req/s)");
    app.add_option("--embed.dim", flags.embed_dim, "embedding dimension");
    app.add_option("--embed.seed", flags.embed_seed, "mock embedding hash seed");

    app.add_option("--nli.kind", flags.nli_kind, "NLI provider")
        ->check(CLI::IsMember({"overlap", "constant", "http"}));
    app.add_option("--nli.endpoint", flags.nli_http.endpoint, "NLI API base URL");
    app.add_option("--nli.model", flags.nli_http.model, "NLI model name");
    app.add_option("--nli.auth-env", flags.nli_http.auth_env,
                   "env var holding the NLI API token");
    app.add_option("--nli.timeout", flags.nli_http.timeout_s, "NLI request timeout (s)");
    app.add_option("--nli.retries", flags.nli_http.max_retries, "NLI transient retry cap");
    app.add_option("--nli.backoff", flags.nli_http.backoff_s, "NLI retry backoff base (s)");
    app.add_option("--nli.rps", flags.nli_http.requests_per_sec, "NLI rate limit (req/s)");
    app.add_option("--nli.constant", flags.nli_constant, "constant NLI entailment value");

    app.add_option("--sample", flags.repl_sample, "corpus sample id whose sources the repl uses");

    CLI::App* stats = app.add_subcommand("stats", "corpus statistics -> stats.json");
    CLI::App* label = app.add_subcommand("label", "precompute relevance labels -> labels.jsonl");
    CLI::App* plan_eval =
        app.add_subcommand("plan-eval", "plan every sample, report per-class F1 -> plans.jsonl");
    CLI::App* retrieve_eval = app.add_subcommand(
        "retrieve-eval", "recall@k under gold plans -> retrieval.json");
    CLI::App* generate =
        app.add_subcommand("generate", "plan, retrieve, generate -> responses.jsonl");
    CLI::App* refine =
        app.add_subcommand("refine", "refine generated responses -> traces.jsonl");
    CLI::App* eval = app.add_subcommand("eval", "full pipeline and report -> report.json");
    CLI::App* repl = app.add_subcommand("repl", "interactive plan/retrieve/generate loop");
    for (CLI::App* sub : {stats, label, plan_eval, retrieve_eval, generate, refine, eval, repl}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = to_run_config(flags);
        if (stats->parsed()) return cmd_stats(cfg);
        if (label->parsed()) return cmd_label(cfg);
        if (plan_eval->parsed()) return cmd_plan_eval(cfg, flags.demo_samples);
        if (retrieve_eval->parsed()) return cmd_retrieve_eval(cfg);
        if (generate->parsed()) return cmd_generate(cfg, flags);
        if (refine->parsed()) return cmd_refine(cfg, flags);
        if (eval->parsed()) return cmd_eval(cfg, flags);
        if (repl->parsed()) return cmd_repl(cfg, flags);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const msrag::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
