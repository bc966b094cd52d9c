#include "msrag/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include "msrag/reader.hpp"

namespace msrag {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::set<std::string> all_gold_ids(const Sample& sample) {
    std::set<std::string> out;
    for (const auto& [source, ids] : sample.label_evidence) {
        out.insert(ids.begin(), ids.end());
    }
    return out;
}

std::size_t max_pool_size(const SourceRegistry& registry) {
    std::size_t out = 1;
    for (const SourceId& source : registry.sources()) {
        out = std::max(out, registry.docs(source).size());
    }
    return out;
}

std::vector<std::string> ranked_ids(const std::vector<ScoredEvidence>& ranking) {
    std::vector<std::string> out;
    out.reserve(ranking.size());
    for (const ScoredEvidence& item : ranking) out.push_back(item.evidence.id);
    return out;
}

ordered_json scored_list_json(const std::vector<ScoredEvidence>& items) {
    ordered_json out = ordered_json::array();
    for (const ScoredEvidence& item : items) {
        out.push_back({{"id", item.evidence.id},
                       {"score", item.score.token()},
                       {"scorer", std::string(to_string(item.scorer))}});
    }
    return out;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write artifact: " + path.string());
    }
    return out;
}

// One parsed JSONL row per sample id; every sample must be covered.
std::map<std::string, json> rows_by_id(const std::filesystem::path& path,
                                       const std::vector<Sample>& samples) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read artifact: " + path.string());
    }
    std::map<std::string, json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json row;
        try {
            row = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError(path.filename().string() + ":" + std::to_string(line_no) +
                              ": invalid JSON: " + e.what());
        }
        std::string id = row.at("id").get<std::string>();
        rows[std::move(id)] = std::move(row);
    }
    for (const Sample& sample : samples) {
        if (rows.count(sample.id) == 0) {
            throw SchemaError(path.filename().string() + " has no row for sample " + sample.id);
        }
    }
    return rows;
}

Plan plan_from_names(const json& names, const SourceRegistry& registry,
                     const std::string& where) {
    Plan plan;
    for (const json& name : names) {
        plan.ordered.emplace_back(name.get<std::string>());
    }
    std::vector<PlanViolation> violations = validate_plan(plan, registry);
    if (!violations.empty()) {
        throw SchemaError(where + ": stored plan invalid: " + violations.front().to_string());
    }
    return plan;
}

}  // namespace

// ---------------------------------------------------------------------------
// Providers

ProviderHandles ProviderBundle::handles() const {
    return {chat.get(), embedder.get(), nli.get()};
}

ProviderBundle make_providers(const ProviderSetup& setup) {
    ProviderBundle bundle;

    if (setup.chat_kind == "mock") {
        auto chat = std::make_unique<ScriptedChatProvider>();
        chat->set_default_reply(setup.chat_mock_reply);
        bundle.chat = std::move(chat);
    } else if (setup.chat_kind == "http") {
        if (setup.chat_http.endpoint.empty()) {
            throw ConfigError("http chat provider needs an endpoint");
        }
        bundle.chat = std::make_unique<HttpChatProvider>(setup.chat_http);
    } else {
        throw ConfigError("unknown chat provider kind: " + setup.chat_kind);
    }

    if (setup.embed_kind == "mock") {
        bundle.embedder = std::make_unique<HashEmbeddingProvider>(setup.embed_seed,
                                                                  setup.embed_dim);
    } else if (setup.embed_kind == "http") {
        if (setup.embed_http.endpoint.empty()) {
            throw ConfigError("http embedding provider needs an endpoint");
        }
        bundle.embedder = std::make_unique<HttpEmbeddingProvider>(setup.embed_http,
                                                                  setup.embed_dim);
    } else {
        throw ConfigError("unknown embedding provider kind: " + setup.embed_kind);
    }

    if (setup.nli_kind == "overlap") {
        bundle.nli = std::make_unique<OverlapNliProvider>();
    } else if (setup.nli_kind == "constant") {
        bundle.nli = std::make_unique<ConstantNliProvider>(setup.nli_constant);
    } else if (setup.nli_kind == "http") {
        if (setup.nli_http.endpoint.empty()) {
            throw ConfigError("http NLI provider needs an endpoint");
        }
        bundle.nli = std::make_unique<HttpNliProvider>(setup.nli_http);
    } else {
        throw ConfigError("unknown NLI provider kind: " + setup.nli_kind);
    }
    return bundle;
}

std::string source_role(const std::string& source_name, const EvalOptions& options) {
    auto it = options.source_roles.find(source_name);
    if (it != options.source_roles.end()) return it->second;
    return source_name.find("PER") != std::string::npos ? "persona" : "knowledge";
}

// ---------------------------------------------------------------------------
// parallel_for

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn,
                  const std::string& label,
                  const std::function<std::string(std::size_t)>& item_name) {
    if (n == 0) return;
    std::size_t worker_count = std::max(1, workers);
    worker_count = std::min(worker_count, n);

    std::vector<std::pair<std::size_t, std::exception_ptr>> errors;
    std::mutex errors_mu;
    std::atomic<std::size_t> next{0};
    auto body = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(errors_mu);
                errors.emplace_back(i, std::current_exception());
            }
        }
    };

    if (worker_count == 1) {
        body();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(worker_count);
        for (std::size_t t = 0; t < worker_count; ++t) threads.emplace_back(body);
        for (std::thread& t : threads) t.join();
    }

    if (errors.empty()) return;
    std::sort(errors.begin(), errors.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [index, eptr] : errors) {
        try {
            std::rethrow_exception(eptr);
        } catch (const std::exception& e) {
            std::cerr << label << " failed for " << item_name(index) << ": " << e.what() << '\n';
        }
    }
    std::rethrow_exception(errors.front().second);
}

// ---------------------------------------------------------------------------
// Stages

std::vector<Sample> load_samples_sorted(const std::filesystem::path& path) {
    std::vector<Sample> samples = load_corpus(path);
    std::stable_sort(samples.begin(), samples.end(),
                     [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return samples;
}

std::vector<PlanResult> run_plan_stage(const std::vector<Sample>& samples, const RunConfig& config,
                                       const ProviderHandles& providers) {
    std::vector<PlanResult> results(samples.size());
    parallel_for(
        samples.size(), config.parallelism,
        [&](std::size_t i) {
            results[i] = plan_sources(samples[i].context, samples[i].registry, config.planner,
                                      providers.chat, &samples[i].label_plan);
        },
        "planning", [&](std::size_t i) { return samples[i].id; });
    return results;
}

std::vector<SampleRetrieval> run_retrieve_stage(const std::vector<Sample>& samples,
                                                const std::vector<Plan>& plans,
                                                const RunConfig& config,
                                                const ProviderHandles& providers,
                                                int top_n_override) {
    if (plans.size() != samples.size()) {
        throw RangeError("plan list does not match sample list");
    }
    std::vector<SampleRetrieval> results(samples.size());
    parallel_for(
        samples.size(), config.parallelism,
        [&](std::size_t i) {
            RetrievalConfig rc = config.retrieval;
            if (top_n_override > 0) rc.top_n = std::max(rc.top_n, top_n_override);
            results[i] = retrieve_chain(samples[i].context, plans[i], samples[i].registry, rc,
                                        providers, all_gold_ids(samples[i]));
        },
        "retrieval", [&](std::size_t i) { return samples[i].id; });
    return results;
}

std::vector<ScoredEvidence> flatten_evidence(const Plan& plan, const SampleRetrieval& retrieval) {
    std::vector<ScoredEvidence> out;
    for (const SourceId& source : plan.ordered) {
        auto it = retrieval.find(source.name());
        if (it == retrieval.end()) continue;
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return out;
}

std::vector<std::string> run_generate_stage(const std::vector<Sample>& samples,
                                            const std::vector<Plan>& plans,
                                            const std::vector<SampleRetrieval>& retrievals,
                                            const RunConfig& config,
                                            const ProviderHandles& providers) {
    if (plans.size() != samples.size() || retrievals.size() != samples.size()) {
        throw RangeError("stage inputs do not match sample list");
    }
    std::vector<std::string> responses(samples.size());
    parallel_for(
        samples.size(), config.parallelism,
        [&](std::size_t i) {
            if (config.generator == "reference") {
                responses[i] = samples[i].reference_response;
                return;
            }
            if (config.generator != "llm") {
                throw ConfigError("unknown generator: " + config.generator);
            }
            if (providers.chat == nullptr) {
                throw ConfigError("llm generator needs a chat provider");
            }
            AssembledPrompt prompt = assemble_input(samples[i].context, plans[i],
                                                    flatten_evidence(plans[i], retrievals[i]));
            responses[i] = generate_response(prompt, *providers.chat, config.gen);
        },
        "generation", [&](std::size_t i) { return samples[i].id; });
    return responses;
}

RefineStageResult run_refine_stage(const std::vector<Sample>& samples,
                                   const std::vector<Plan>& plans,
                                   const std::vector<SampleRetrieval>& retrievals,
                                   const std::vector<std::string>& responses,
                                   const RunConfig& config, const ProviderHandles& providers) {
    if (plans.size() != samples.size() || retrievals.size() != samples.size() ||
        responses.size() != samples.size()) {
        throw RangeError("stage inputs do not match sample list");
    }
    if (providers.chat == nullptr || providers.nli == nullptr) {
        throw ConfigError("refinement needs chat and NLI providers");
    }
    RefineStageResult out;
    out.responses.resize(samples.size());
    out.traces.resize(samples.size());
    out.evidences.resize(samples.size());
    parallel_for(
        samples.size(), config.parallelism,
        [&](std::size_t i) {
            const Sample& sample = samples[i];
            const Plan& plan = plans[i];
            if (plan.is_null() && config.refine.skip_on_null) {
                out.responses[i] = responses[i];
                return;
            }
            // Replacement candidates come from a full-depth ranking of the
            // same chained retrieval that produced the original evidence.
            RetrievalConfig rc = config.retrieval;
            rc.top_n = static_cast<int>(max_pool_size(sample.registry));
            SampleRetrieval full = retrieve_chain(sample.context, plan, sample.registry, rc,
                                                  providers, all_gold_ids(sample));
            EvidenceRanker ranker = [&full](const DialogueContext&,
                                            const SourceId& source) -> std::vector<ScoredEvidence> {
                auto it = full.find(source.name());
                if (it == full.end()) {
                    throw ChainError("no ranking available for source " + source.name());
                }
                return it->second;
            };
            MultiOutcome outcome =
                refine_multi(sample.context, plan, flatten_evidence(plan, retrievals[i]),
                             responses[i], *providers.chat, *providers.nli, ranker, config.refine);
            out.responses[i] = outcome.response;
            out.traces[i] = outcome.traces;
            out.evidences[i] = outcome.evidences;
        },
        "refinement", [&](std::size_t i) { return samples[i].id; });
    return out;
}

// ---------------------------------------------------------------------------
// Recall evaluation

RecallEval run_recall_eval(const std::vector<Sample>& samples, const RunConfig& config,
                           const ProviderHandles& providers) {
    std::vector<SampleRetrieval> rankings(samples.size());
    parallel_for(
        samples.size(), config.parallelism,
        [&](std::size_t i) {
            if (samples[i].label_plan.is_null()) return;
            RetrievalConfig rc = config.retrieval;
            rc.top_n = std::max(rc.top_n, config.eval.k);
            rankings[i] = retrieve_chain(samples[i].context, samples[i].label_plan,
                                         samples[i].registry, rc, providers,
                                         all_gold_ids(samples[i]));
        },
        "recall evaluation", [&](std::size_t i) { return samples[i].id; });

    RecallEval out;
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // label -> (hits, n)
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& sample = samples[i];
        if (sample.label_plan.is_null()) continue;
        out.per_sample[sample.id] = rankings[i];
        for (const SourceId& source : sample.label_plan.ordered) {
            std::set<std::string> gold = sample.gold_ids(source);
            if (gold.empty()) {
                ++out.n_skipped;
                continue;
            }
            std::string label = source.name();
            if (config.eval.recall_grouping == "class-source") {
                label = config.eval.scheme.classify(sample.label_plan) + "/" + source.name();
            }
            int hit = hit_at_k(ranked_ids(rankings[i].at(source.name())), gold, config.eval.k);
            auto& [hits, n] = tally[label];
            hits += static_cast<std::size_t>(hit);
            ++n;
        }
    }
    for (const auto& [label, counts] : tally) {
        RecallResult r;
        r.n_evaluated = counts.second;
        r.mean = static_cast<double>(counts.first) / static_cast<double>(counts.second);
        out.groups[label] = r;
    }
    return out;
}

// ---------------------------------------------------------------------------
// evaluate

EvalReport evaluate(const std::vector<Sample>& samples, const std::vector<Plan>& plans,
                    const std::vector<SampleRetrieval>& retrievals,
                    const std::vector<std::string>& responses, const RunConfig& config,
                    const ProviderHandles& providers) {
    if (plans.size() != samples.size() || responses.size() != samples.size()) {
        throw RangeError("evaluate inputs do not match sample list");
    }
    EvalReport report;
    report.n_samples = samples.size();
    report.recall_k = config.eval.k;

    // Planning F1.
    std::vector<Plan> gold;
    gold.reserve(samples.size());
    for (const Sample& sample : samples) gold.push_back(sample.label_plan);
    report.planning_f1 = f1_per_class(plans, gold, config.eval.scheme);

    // Recall@k against gold plans.
    RecallEval recall = run_recall_eval(samples, config, providers);
    for (const auto& [label, result] : recall.groups) {
        report.recall_at_k[label] = result.mean;
        report.recall_evaluated[label] = result.n_evaluated;
    }
    report.recall_skipped = recall.n_skipped;

    // Generation metrics, macro-averaged over samples.
    double bleu_sum = 0.0, rouge_sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        bleu_sum += bleu1(responses[i], samples[i].reference_response);
        rouge_sum += rouge_l(responses[i], samples[i].reference_response);
    }
    report.bleu1_macro = bleu_sum / static_cast<double>(samples.size());
    report.rouge_l_macro = rouge_sum / static_cast<double>(samples.size());

    // Consistency: one (grounding, response) pair per sample and grounded
    // source, pooled by source role.
    if (providers.nli != nullptr) {
        std::vector<std::pair<std::string, std::string>> persona_pairs;
        std::vector<std::pair<std::string, std::string>> knowledge_pairs;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const Sample& sample = samples[i];
            std::map<std::string, std::string> grounding;  // source -> premise text
            if (config.eval.grounding == "gold") {
                for (const auto& [source, ids] : sample.label_evidence) {
                    std::string premise;
                    for (const std::string& id : ids) {
                        const Evidence* doc = sample.registry.find_evidence(id);
                        if (doc == nullptr) continue;
                        if (!premise.empty()) premise += '\n';
                        premise += doc->text;
                    }
                    if (!premise.empty()) grounding[source] = std::move(premise);
                }
            } else if (config.eval.grounding == "predicted") {
                if (i < retrievals.size()) {
                    for (const auto& [source, items] : retrievals[i]) {
                        std::string premise;
                        for (const ScoredEvidence& item : items) {
                            if (!premise.empty()) premise += '\n';
                            premise += item.evidence.text;
                        }
                        if (!premise.empty()) grounding[source] = std::move(premise);
                    }
                }
            } else {
                throw ConfigError("unknown grounding mode: " + config.eval.grounding);
            }
            for (auto& [source, premise] : grounding) {
                std::string role = source_role(source, config.eval);
                if (role == "persona") {
                    persona_pairs.emplace_back(std::move(premise), responses[i]);
                } else if (role == "knowledge") {
                    knowledge_pairs.emplace_back(std::move(premise), responses[i]);
                }  // "ignore" drops the pair
            }
        }
        if (!persona_pairs.empty()) {
            report.persona_consistency =
                consistency_rate(persona_pairs, *providers.nli, config.eval.nli_threshold)
                    .percentage;
        }
        if (!knowledge_pairs.empty()) {
            report.knowledge_consistency =
                consistency_rate(knowledge_pairs, *providers.nli, config.eval.nli_threshold)
                    .percentage;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Artifacts

void write_stats_artifact(const std::filesystem::path& path, const CorpusStats& stats) {
    std::ofstream out = open_for_write(path);
    out << stats.to_json().dump(2) << '\n';
}

void write_plans_artifact(const std::filesystem::path& path, const std::vector<Sample>& samples,
                          const std::vector<PlanResult>& results) {
    if (results.size() != samples.size()) {
        throw RangeError("plan results do not match sample list");
    }
    std::ofstream out = open_for_write(path);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ordered_json row;
        row["id"] = samples[i].id;
        ordered_json names = ordered_json::array();
        for (const SourceId& source : results[i].plan.ordered) names.push_back(source.name());
        row["plan"] = std::move(names);
        row["signature"] = plan_signature(results[i].plan);
        row["raw_output"] = results[i].raw_output;
        row["fallback_used"] = results[i].fallback_used;
        row["dropped"] = results[i].dropped;
        ordered_json violations = ordered_json::array();
        for (const PlanViolation& v : results[i].violations) violations.push_back(v.to_string());
        row["violations"] = std::move(violations);
        out << row.dump() << '\n';
    }
}

std::vector<Plan> read_plans_artifact(const std::filesystem::path& path,
                                      const std::vector<Sample>& samples) {
    std::map<std::string, json> rows = rows_by_id(path, samples);
    std::vector<Plan> plans;
    plans.reserve(samples.size());
    for (const Sample& sample : samples) {
        plans.push_back(plan_from_names(rows.at(sample.id).at("plan"), sample.registry,
                                        "plans artifact sample " + sample.id));
    }
    return plans;
}

void write_retrieval_artifact(const std::filesystem::path& path, const RecallEval& recall,
                              const RunConfig& config) {
    ordered_json out;
    out["k"] = config.eval.k;
    out["scorer"] = std::string(to_string(config.retrieval.scorer));
    out["grouping"] = config.eval.recall_grouping;
    out["groups"] = ordered_json::object();
    for (const auto& [label, result] : recall.groups) {
        out["groups"][label] = {{"recall", result.mean}, {"n_evaluated", result.n_evaluated}};
    }
    out["n_skipped"] = recall.n_skipped;
    out["per_sample"] = ordered_json::object();
    for (const auto& [id, retrieval] : recall.per_sample) {
        ordered_json by_source = ordered_json::object();
        for (const auto& [source, items] : retrieval) {
            by_source[source] = scored_list_json(items);
        }
        out["per_sample"][id] = std::move(by_source);
    }
    std::ofstream file = open_for_write(path);
    file << out.dump(2) << '\n';
}

void write_responses_artifact(const std::filesystem::path& path,
                              const std::vector<Sample>& samples,
                              const std::vector<Plan>& plans,
                              const std::vector<SampleRetrieval>& retrievals,
                              const std::vector<std::string>& responses) {
    if (plans.size() != samples.size() || retrievals.size() != samples.size() ||
        responses.size() != samples.size()) {
        throw RangeError("responses artifact inputs do not match sample list");
    }
    std::ofstream out = open_for_write(path);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ordered_json row;
        row["id"] = samples[i].id;
        ordered_json names = ordered_json::array();
        for (const SourceId& source : plans[i].ordered) names.push_back(source.name());
        row["plan"] = std::move(names);
        ordered_json evidence = ordered_json::object();
        for (const auto& [source, items] : retrievals[i]) {
            evidence[source] = scored_list_json(items);
        }
        row["evidence"] = std::move(evidence);
        row["response"] = responses[i];
        row["reference"] = samples[i].reference_response;
        out << row.dump() << '\n';
    }
}

ResponsesArtifact read_responses_artifact(const std::filesystem::path& path,
                                          const std::vector<Sample>& samples) {
    std::map<std::string, json> rows = rows_by_id(path, samples);
    ResponsesArtifact out;
    for (const Sample& sample : samples) {
        const json& row = rows.at(sample.id);
        std::string where = "responses artifact sample " + sample.id;
        out.plans.push_back(plan_from_names(row.at("plan"), sample.registry, where));
        SampleRetrieval retrieval;
        for (auto it = row.at("evidence").begin(); it != row.at("evidence").end(); ++it) {
            std::vector<ScoredEvidence> items;
            for (const json& entry : it.value()) {
                std::string evidence_id = entry.at("id").get<std::string>();
                const Evidence* doc = sample.registry.find_evidence(evidence_id);
                if (doc == nullptr) {
                    throw SchemaError(where + ": unknown evidence id " + evidence_id);
                }
                items.push_back(
                    {*doc, RelevanceScore::from_token(entry.at("score").get<std::string>()),
                     scorer_kind_from_string(entry.at("scorer").get<std::string>())});
            }
            retrieval[it.key()] = std::move(items);
        }
        out.retrievals.push_back(std::move(retrieval));
        out.responses.push_back(row.at("response").get<std::string>());
    }
    return out;
}

void write_traces_artifact(const std::filesystem::path& path, const std::vector<Sample>& samples,
                           const RefineStageResult& refined) {
    std::ofstream out = open_for_write(path);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ordered_json row;
        row["id"] = samples[i].id;
        ordered_json passes = ordered_json::array();
        if (i < refined.traces.size()) {
            for (const PassTrace& trace : refined.traces[i]) passes.push_back(trace.to_json());
        }
        row["passes"] = std::move(passes);
        row["final_response"] = i < refined.responses.size() ? refined.responses[i] : "";
        out << row.dump() << '\n';
    }
}

namespace {

ordered_json run_echo(const RunConfig& config) {
    ordered_json run;
    run["planner"] = std::string(to_string(config.planner.backend));
    run["scorer"] = std::string(to_string(config.retrieval.scorer));
    run["generator"] = config.generator;
    run["top_n"] = config.retrieval.top_n;
    run["dependency_mode"] =
        config.retrieval.dependency_mode == DependencyMode::augment ? "augment" : "filter";
    run["k"] = config.eval.k;
    run["alpha"] = config.refine.alpha;
    run["steps"] = config.refine.steps;
    run["grounding"] = config.eval.grounding;
    run["grouping"] = config.eval.recall_grouping;
    run["parallelism"] = config.parallelism;
    run["seed"] = config.seed;
    return run;
}

}  // namespace

void write_report_artifact(const std::filesystem::path& path, const EvalReport& report,
                           const RunConfig& config) {
    ordered_json out = report.to_json();
    out["run"] = run_echo(config);
    std::ofstream file = open_for_write(path);
    file << out.dump(2) << '\n';
}

void append_report_csv(const std::filesystem::path& path, const EvalReport& report,
                       const RunConfig& config) {
    bool fresh = !std::filesystem::exists(path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out) throw ConfigError("cannot append to CSV: " + path.string());
    if (fresh) {
        out << "planner,scorer,generator,top_n,k,alpha,steps,seed,n_samples,"
               "macro_f1,recall,bleu1,rouge_l,persona_consistency,knowledge_consistency\n";
    }
    double f1_sum = 0.0;
    for (const auto& [label, stats] : report.planning_f1) f1_sum += stats.f1;
    double macro_f1 =
        report.planning_f1.empty() ? 0.0 : f1_sum / static_cast<double>(report.planning_f1.size());
    double hits = 0.0;
    std::size_t n_eval = 0;
    for (const auto& [label, recall] : report.recall_at_k) {
        std::size_t n = report.recall_evaluated.count(label) ? report.recall_evaluated.at(label) : 0;
        hits += recall * static_cast<double>(n);
        n_eval += n;
    }
    double overall_recall = n_eval == 0 ? 0.0 : hits / static_cast<double>(n_eval);
    out << to_string(config.planner.backend) << ',' << to_string(config.retrieval.scorer) << ','
        << config.generator << ',' << config.retrieval.top_n << ',' << config.eval.k << ','
        << config.refine.alpha << ',' << config.refine.steps << ',' << config.seed << ','
        << report.n_samples << ',' << macro_f1 << ',' << overall_recall << ','
        << report.bleu1_macro << ',' << report.rouge_l_macro << ','
        << (report.persona_consistency ? std::to_string(*report.persona_consistency) : "") << ','
        << (report.knowledge_consistency ? std::to_string(*report.knowledge_consistency) : "")
        << '\n';
}

}  // namespace msrag
