"""Smoke test for the python bindings.

Run with the package importable (ctest sets PYTHONPATH to the staged build
package) and MSRAG_TOY_CORPUS pointing at the bundled corpus. Every expected
number is recomputed here independently or is a frozen closed form.
"""

import json
import math
import os
from pathlib import Path

import msrag


def corpus_path() -> str:
    env = os.environ.get("MSRAG_TOY_CORPUS")
    if env:
        return env
    return str(Path(__file__).resolve().parents[2] / "data" / "toy_corpus.jsonl")


def approx(a: float, b: float, eps: float = 1e-12) -> bool:
    return abs(a - b) <= eps


def two_source_registry() -> msrag.SourceRegistry:
    registry = msrag.SourceRegistry()
    persona = msrag.SourceId("PERSONA")
    documents = msrag.SourceId("DOCUMENTS")
    registry.add_source(persona, [
        msrag.Evidence("p1", persona, "I like hiking"),
        msrag.Evidence("p2", persona, "I collect vinyl records"),
    ])
    registry.add_source(documents, [
        msrag.Evidence("d1", documents, "trail guide for the alps"),
    ], [persona])
    return registry


def test_scores_and_tokens():
    assert msrag.quantize_score(0.25).tenths == 3  # midpoint rounds up
    assert msrag.quantize_score(0.74).token() == "0.7"
    assert msrag.RelevanceScore.from_token("0.8").value == 0.8
    try:
        msrag.quantize_score(1.5)
    except msrag.RangeError:
        pass
    else:
        raise AssertionError("out-of-range score must raise")
    assert issubclass(msrag.RangeError, msrag.Error)
    assert msrag.SOURCE_BEGIN == "[SOURCE]" and msrag.NULL_DECISION == "NULL"


def test_plans():
    registry = two_source_registry()
    plan = msrag.Plan([msrag.SourceId("PERSONA"), msrag.SourceId("DOCUMENTS")])
    wire = msrag.serialize_plan(plan)
    assert wire == "[SOURCE] PERSONA DOCUMENTS [EOS]"
    parsed = msrag.parse_plan("Sure! " + wire + " thanks", registry)
    assert parsed.plan == plan and parsed.dropped == []

    noisy = msrag.parse_plan("[SOURCE] PERSONA BOGUS [EOS]", registry)
    assert [s.name for s in noisy.plan.ordered] == ["PERSONA"]
    assert noisy.dropped == ["BOGUS"]

    violations = msrag.validate_plan(msrag.Plan([msrag.SourceId("DOCUMENTS")]), registry)
    assert len(violations) == 1
    assert violations[0].kind == msrag.PlanViolation.Kind.missing_dependency

    assert msrag.serialize_plan(msrag.Plan()) == "[SOURCE] NULL [EOS]"
    assert msrag.parse_plan("[SOURCE] NULL [EOS]", registry).plan.is_null()


def test_bm25_against_recomputation():
    source = msrag.SourceId("DOCS")
    texts = ["sweet potato pie", "potato soup with leek", "green tea ceremony"]
    pool = [msrag.Evidence(f"d{i}", source, t) for i, t in enumerate(texts)]
    scorer = msrag.Bm25Scorer()
    got = scorer.score_pool("sweet potato", pool)

    # Independent Okapi recomputation (k1 = 1.2, b = 0.75).
    token_lists = [t.split() for t in texts]
    n = len(token_lists)
    avgdl = sum(len(t) for t in token_lists) / n
    want = [0.0] * n
    for term in "sweet potato".split():
        df = sum(1 for tokens in token_lists if term in tokens)
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        for d, tokens in enumerate(token_lists):
            tf = tokens.count(term)
            if tf == 0:
                continue
            want[d] += idf * (tf * 2.2) / (tf + 1.2 * (0.25 + 0.75 * len(tokens) / avgdl))
    assert all(approx(g, w) for g, w in zip(got, want)), (got, want)

    ranked = msrag.retrieve_topk("sweet potato", pool, scorer, 2)
    assert [r.evidence.id for r in ranked] == ["d0", "d1"]
    assert all(0.0 <= r.score.value <= 1.0 for r in ranked)


def test_metrics():
    assert approx(msrag.bleu1("a a b", "a b b"), 2.0 / 3.0)
    assert approx(msrag.rouge_l("a b c d", "a b x d"), 0.75)
    assert msrag.tokenize("green tea") == ["green", "tea"]

    batch = msrag.ContrastiveBatch(1.0, [1.0])
    assert approx(msrag.nll_loss(batch), 0.6931471805599453, 1e-12)
    built = msrag.build_batch([
        msrag.ScoredEvidence(msrag.Evidence("a", msrag.SourceId("S"), "x"),
                             msrag.RelevanceScore.from_tenths(9)),
        msrag.ScoredEvidence(msrag.Evidence("b", msrag.SourceId("S"), "y"),
                             msrag.RelevanceScore.from_tenths(4)),
    ], "a")
    assert built.positive == 0.9 and built.negatives == [0.4]
    assert not built.substitute_injected

    nli = msrag.ConstantNliProvider(1.0)
    rate = msrag.consistency_rate([("premise", "hypothesis")], nli)
    assert rate.percentage == 100.0 and rate.n_pairs == 1


def test_assembly_and_mask():
    source = msrag.SourceId("PERSONA")
    context = msrag.DialogueContext([msrag.Turn(msrag.Role.user, "hi")])
    plan = msrag.Plan([source])
    evidences = [
        msrag.ScoredEvidence(msrag.Evidence("p1", source, "I like hiking"),
                             msrag.RelevanceScore.from_tenths(8)),
        msrag.ScoredEvidence(msrag.Evidence("p2", source, "I collect vinyl"),
                             msrag.RelevanceScore.from_tenths(3)),
    ]
    prompt = msrag.assemble_input(context, plan, evidences)
    assert prompt.text.startswith("User: hi\n[SOURCE] PERSONA [EOS] [EVIDENCE] ")
    assert len(prompt.segments) == 7
    mask = msrag.build_attention_mask(prompt)
    assert not mask.pure_causal()
    assert not mask.allowed(4, 2)  # second evidence cannot see the first
    assert not mask.allowed(5, 3)  # nor its evaluation token
    assert mask.allowed(6, 4)      # the response slot sees everything

    shuffled = msrag.shuffle_evidence(evidences, 0)
    assert sorted(s.evidence.id for s in shuffled) == ["p1", "p2"]

    order = msrag.shuffle_evidence([
        msrag.ScoredEvidence(msrag.Evidence(f"e{i}", source, "t"),
                             msrag.RelevanceScore.from_tenths(5))
        for i in range(1, 6)
    ], 0)
    assert [s.evidence.id for s in order] == ["e3", "e1", "e2", "e4", "e5"]


def test_refinement_with_python_ranker():
    source = msrag.SourceId("PERSONA")
    context = msrag.DialogueContext([msrag.Turn(msrag.Role.user, "hi")])
    plan = msrag.Plan([source])
    stale = msrag.ScoredEvidence(msrag.Evidence("e1", source, "old fact"),
                                 msrag.RelevanceScore.from_tenths(1))
    keeper = msrag.ScoredEvidence(msrag.Evidence("e2", source, "good fact"),
                                  msrag.RelevanceScore.from_tenths(9))
    novel = msrag.ScoredEvidence(msrag.Evidence("e3", source, "fresh fact"),
                                 msrag.RelevanceScore.from_tenths(10))

    calls = []

    def ranker(ctx, src):
        calls.append(src.name)
        return [stale, novel]

    chat = msrag.ScriptedChatProvider()
    chat.set_default_reply("polished answer")
    nli = msrag.ConstantNliProvider(1.0)
    config = msrag.RefinementConfig()
    config.alpha = 1
    config.steps = 3

    out = msrag.refine_multi(context, plan, [stale, keeper], "draft", chat, nli, ranker, config)
    assert calls and calls[0] == "PERSONA"
    assert len(out.traces) == 2  # second pass exhausts the pool and stops
    assert out.traces[0].evicted_ids == ["e1"]
    assert out.traces[0].injected_ids == ["e3"]
    assert out.response == "polished answer"
    assert [e.evidence.id for e in out.evidences] == ["e3", "e2"]
    trace = json.loads(out.traces[0].to_json_text())
    assert trace["evicted"] == ["e1"]

    scores = msrag.combined_scores([stale, keeper], "draft", nli)
    assert approx(scores.combined[0], 0.1) and approx(scores.combined[1], 0.9)
    assert msrag.select_updates(scores.combined, 1) == [0]


def test_corpus_and_planning():
    samples = msrag.load_corpus(corpus_path())
    assert len(samples) == 30
    stats = msrag.corpus_stats(samples)
    assert stats.n_samples == 30
    assert approx(stats.pct_with_source, 50.0)
    assert stats.plan_histogram["NULL"] == 15

    gold = [s.label_plan for s in samples]
    config = msrag.PlannerConfig()
    config.backend = msrag.PlannerBackend.oracle
    predicted = [
        msrag.plan_sources(s.context, s.registry, config, None, s.label_plan).plan
        for s in samples
    ]
    f1 = msrag.f1_per_class(predicted, gold)
    assert all(cls.f1 == 1.0 for cls in f1.values())

    sample = samples[0]
    assert sample.context.render_context().startswith(("User:", "System:"))


def test_training_record():
    samples = msrag.load_corpus(corpus_path())
    sample = next(s for s in samples if not s.label_plan.is_null())
    cache = msrag.LabelCache()
    for source in sample.registry.sources:
        gold = sample.gold_ids(source)
        for doc in sample.registry.docs(source):
            tenths = 10 if doc.id in gold else 0
            cache.put(msrag.LabelCacheEntry(sample.id, doc.id,
                                            msrag.RelevanceScore.from_tenths(tenths),
                                            msrag.ScorerKind.hard))
    record = msrag.emit_training_record(sample, cache, msrag.ScorerKind.hard, seed=0)
    assert record.input.startswith(("User:", "System:"))
    assert record.target.endswith(sample.reference_response)
    payload = json.loads(record.to_json_text())
    assert payload["input"] == record.input
    assert "mask" in payload


def main():
    checks = [
        test_scores_and_tokens,
        test_plans,
        test_bm25_against_recomputation,
        test_metrics,
        test_assembly_and_mask,
        test_refinement_with_python_ranker,
        test_corpus_and_planning,
        test_training_record,
    ]
    for check in checks:
        check()
        print(f"ok {check.__name__}")
    print("python smoke: all passed")


if __name__ == "__main__":
    main()
