"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Everything runs offline against the bundled fixture corpus and the
2-d embedding table.
"""
import json
import math
import random
import threading
import time
from dataclasses import replace

import pytest

from dialattack.attack import (
    AttackConfig,
    AttackTools,
    attack_question,
    prepare_target,
    word_importance,
    _overrides,
    _splice,
)
from dialattack.constraints import RAW_CONSTRAINTS, admissible
from dialattack.corpus import flatten_instances
from dialattack.fixtures import family_for, make_fixture_corpus
from dialattack.lexsub import SynonymCandidate, tag_word, tokenize
from dialattack.metrics import mrr, ndcg, perplexity, recall_at_k
from dialattack.oracle import (
    CandidateScores,
    Oracle,
    OverlapRanker,
    RankerConfig,
    softmax_probs,
    victim_request_handler,
)
from dialattack.protocol import make_http_server
from dialattack.runner import (
    AttackTypeClassifier,
    ExperimentConfig,
    ablation_sweep,
    aggregate_annotations,
    run_experiment,
)


def passed(line: str) -> None:
    print(f"[PASS] {line}")


@pytest.fixture(scope="module")
def corpus_instances():
    instances = flatten_instances(make_fixture_corpus(40, 5))
    assert len(instances) >= 200
    return instances


# ---------------------------------------------------------------------------
# Criterion 1: metric oracle equivalence within 1e-9, runtime < 5 s.

def test_metric_oracle_equivalence():
    start = time.monotonic()
    rng = random.Random(515)
    for _ in range(200):
        n = rng.randint(1, 80)
        ranks = [rng.randint(1, 100) for _ in range(n)]
        for k in (1, 5, 10):
            brute = sum(1 for r in ranks if r <= k) / len(ranks)
            assert abs(recall_at_k(ranks, k) - brute) <= 1e-9
        brute_mrr = sum(1.0 / r for r in ranks) / len(ranks)
        assert abs(mrr(ranks) - brute_mrr) <= 1e-9

        values = [rng.random() for _ in range(100)]
        relevance = [0.0] * 100
        for idx in rng.sample(range(100), rng.randint(1, 10)):
            relevance[idx] = rng.choice([0.25, 0.5, 0.75, 1.0])
        scores = CandidateScores(tuple(values))
        perm = sorted(range(100), key=lambda i: (-values[i], i))
        kk = sum(1 for r in relevance if r > 0)
        brute_dcg = sum(relevance[perm[i]] / math.log2(i + 2) for i in range(kk))
        ideal = sorted(relevance, reverse=True)
        brute_idcg = sum(ideal[i] / math.log2(i + 2) for i in range(kk))
        assert abs(ndcg(scores, relevance) - brute_dcg / brute_idcg) <= 1e-9
    elapsed = time.monotonic() - start
    assert elapsed < 5.0
    passed(f"metric oracle equivalence on 200 synthetic instances ({elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# Criterion 2: NDCG worked example.

def test_ndcg_worked_example():
    relevance = [1.0, 0.5, 0.0, 0.0] + [0.0] * 96
    values = [0.0] * 100
    for rank, idx in enumerate([2, 0, 1, 3]):  # predicted order [C, A, B, D]
        values[idx] = float(4 - rank)
    value = ndcg(CandidateScores(tuple(values)), relevance)
    assert value == pytest.approx(0.47962, abs=1e-5)
    passed(f"NDCG worked example = {value:.5f} (0.47962 +/- 1e-5)")


# ---------------------------------------------------------------------------
# Criterion 3: perplexity anchors and shift invariance.

def test_perplexity_criteria():
    uniform = perplexity([0.01] * 57)
    assert abs(uniform - 100.0) <= 1e-9
    hand = perplexity([0.5, 0.25])
    assert hand == pytest.approx(2.82843, abs=1e-5)
    rng = random.Random(3)
    values = [rng.random() for _ in range(100)]
    base = softmax_probs(CandidateScores(tuple(values)))
    shifted = softmax_probs(CandidateScores(tuple(v + 41.5 for v in values)))
    assert abs(perplexity(base) - perplexity(shifted)) <= 1e-9
    passed(f"perplexity: uniform={uniform:.12f}, [0.5,0.25]={hand:.5f}, shift-invariant")


# ---------------------------------------------------------------------------
# Criterion 4: attack-loop invariants on >= 200 instances + byte-identical replay.

def token_levenshtein(a, b):
    m, n = len(a), len(b)
    prev = list(range(n + 1))
    for i in range(1, m + 1):
        cur = [i] + [0] * n
        for j in range(1, n + 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (a[i - 1] != b[j - 1]))
        prev = cur
    return prev[n]


class CountingVictim:
    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def score_query(self, query):
        self.calls += 1
        return self.inner.score_query(query)


def test_attack_loop_invariants(corpus_instances):
    cfg = AttackConfig()
    tools = AttackTools()
    checked = 0
    for inst in corpus_instances:
        victim = CountingVictim(OverlapRanker(RankerConfig()))
        result = attack_question(inst, victim, cfg, tools)
        checked += 1

        # substitution locality: token edit distance == |substitutions|
        before = [t.surface for t in tokenize(result.original_text)]
        after = [t.surface for t in tokenize(result.adversarial_text)]
        assert token_levenshtein(before, after) == len(result.substitutions)

        # query accounting against an instrumented victim
        assert result.queries == victim.calls
        target = prepare_target(inst, "question")
        attackable = sum(1 for t in target.tokens
                         if t.is_word and not t.is_stopword and t.pos != "NUM")
        assert result.queries <= 1 + attackable + attackable * cfg.k

        # constraint compliance: every commit individually re-passes admissible()
        committed = {}
        for sub in result.substitutions:
            committed[sub.position] = sub.replacement
            text = _splice(target.raw, target.tokens, dict(committed))
            cand = SynonymCandidate(word=sub.replacement, provider_score=sub.provider_score,
                                    pos=tag_word(sub.replacement))
            decision = admissible(target.tokens[sub.position], cand, target.raw, text,
                                  cfg.constraints, scorer=tools.scorer, grammar=tools.grammar)
            assert decision.admit

        # strict-decrease commit rule on non-flip commits
        oracle = Oracle(OverlapRanker(RankerConfig()))
        p_prev = oracle.gt_probability(oracle.score(inst), inst.gt_index)
        replay = {}
        non_flip = result.substitutions[:-1] if result.success else result.substitutions
        for sub in non_flip:
            replay[sub.position] = sub.replacement
            scores = oracle.score(inst, **_overrides(target, dict(replay)))
            p = oracle.gt_probability(scores, inst.gt_index)
            assert p < p_prev
            p_prev = p
    assert checked >= 200

    # deterministic replay: two runs, byte-identical logs
    cfg_exp = ExperimentConfig(attack=AttackConfig(seed=7))
    a = run_experiment(cfg_exp)
    b = run_experiment(cfg_exp)
    log_a = "\n".join(json.dumps(r, sort_keys=True) for r in a.records)
    log_b = "\n".join(json.dumps(r, sort_keys=True) for r in b.records)
    assert log_a == log_b
    passed(f"attack-loop invariants hold on {checked} attacks; replay byte-identical")


# ---------------------------------------------------------------------------
# Criterion 5: epsilon and constraint-stack monotonicity, < 60 s total.

def test_sweep_monotonicity():
    start = time.monotonic()
    cfg = ExperimentConfig(victim="builtin:overlap-q")
    eps_entries = ablation_sweep(cfg, "epsilon", values=[0.1, 0.3, 0.5, 0.7])
    eps_counts = [e.report.n_success for e in eps_entries]
    assert eps_counts == sorted(eps_counts, reverse=True), eps_counts

    stack_entries = ablation_sweep(cfg, "constraint_stack")
    stack_counts = [e.report.n_success for e in stack_entries]
    assert stack_counts == sorted(stack_counts, reverse=True), stack_counts

    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    passed(f"epsilon sweep {eps_counts} and constraint stack {stack_counts} "
           f"non-increasing ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 6: importance vs random over 5 seeds; planted word ranked first.

def test_importance_vs_random(corpus_instances):
    base = AttackConfig(constraints=RAW_CONSTRAINTS, max_substitutions=1)
    rates = []
    for seed in range(5):
        imp = run_experiment(ExperimentConfig(
            victim="builtin:overlap-q", attack=replace(base, seed=seed)))
        rnd = run_experiment(ExperimentConfig(
            victim="builtin:overlap-q", attack=replace(base, seed=seed),
            word_selection="random"))
        imp_rate = imp.report.n_success / imp.report.n_attempted
        rnd_rate = rnd.report.n_success / rnd.report.n_attempted
        assert imp_rate >= rnd_rate, (seed, imp_rate, rnd_rate)
        rates.append((imp_rate, rnd_rate))

    victim = OverlapRanker(RankerConfig())
    first = 0
    for inst in corpus_instances:
        family = family_for(int(inst.dialog.image_id[2:]))
        order = word_importance(inst, Oracle(victim), "question")
        target = prepare_target(inst, "question")
        if target.tokens[order[0][0]].lower == family.w:
            first += 1
    share = first / len(corpus_instances)
    assert share >= 0.95
    passed(f"importance >= random in all 5 seeds {rates}; planted word first in "
           f"{share * 100:.1f}% of {len(corpus_instances)} instances")


# ---------------------------------------------------------------------------
# Criterion 7: history-robustness direction.

def test_history_robustness_direction():
    question_cfg = AttackConfig()
    no_hist = run_experiment(ExperimentConfig(victim="builtin:overlap-q", attack=question_cfg))
    with_hist = run_experiment(ExperimentConfig(victim="builtin:overlap-qh", attack=question_cfg))
    drop_no = abs(no_hist.report.metrics["R@1"].relative_delta_percent or 0.0)
    drop_with = abs(with_hist.report.metrics["R@1"].relative_delta_percent or 0.0)
    assert drop_with < drop_no

    history_cfg = AttackConfig(target="history")
    hist_aware = run_experiment(ExperimentConfig(victim="builtin:overlap-qh", attack=history_cfg))
    hist_blind = run_experiment(ExperimentConfig(victim="builtin:overlap-q", attack=history_cfg))
    ppl_aware = hist_aware.report.metrics["PPL"]
    ppl_blind = hist_blind.report.metrics["PPL"]
    delta_aware = ppl_aware.after - ppl_aware.before
    delta_blind = ppl_blind.after - ppl_blind.before
    assert delta_aware > 0.0
    assert delta_blind == 0.0
    passed(f"question attack |dR@1|: history-aware {drop_with:.1f}% < question-only "
           f"{drop_no:.1f}%; history attack dPPL: aware +{delta_aware:.3f}, blind {delta_blind:.1f}")


# ---------------------------------------------------------------------------
# Criterion 8: attack-type classifier anchors + 40-pair fixture.

def test_attack_type_classifier():
    classifier = AttackTypeClassifier()
    anchors = [
        ("color", "colour", "british_american"),
        ("great", "greater", "comparative_superlative"),
        ("cat", "cats", "singular_plural"),
        ("sunny", "sun", "other"),
    ]
    for original, replacement, expected in anchors:
        assert classifier.classify(original, replacement) == expected

    from test_runner import CLASSIFY_FIXTURE

    assert len(CLASSIFY_FIXTURE) == 40
    hits = sum(1 for a, b, want in CLASSIFY_FIXTURE if classifier.classify(a, b) == want)
    assert hits == 40
    passed("attack-type classifier: 4 anchors + 40-pair fixture at 100%")


# ---------------------------------------------------------------------------
# Criterion 9: annotation aggregation matches hand computation.

def test_annotation_aggregation():
    rows = []
    # item A: {yes, yes, no}; item B: {no, no, unsure}; item C: {yes, unsure, unsure}
    for item, values in (("A", ["yes", "yes", "no"]),
                         ("B", ["no", "no", "unsure"]),
                         ("C", ["yes", "unsure", "unsure"])):
        for i, value in enumerate(values):
            rows.append({"item_id": item, "annotator_id": f"ann{i}",
                         "task": "label_consistency", "value": value})
    for i, value in enumerate([5, 4, 4]):
        rows.append({"item_id": "G", "annotator_id": f"ann{i}",
                     "task": "grammaticality", "value": value})
    summary = aggregate_annotations(rows)
    label = summary["tasks"]["label_consistency"]
    # averaging: 9 ratings = 3 yes... hand count: yes: A2+C1=3, no: A1+B2=3, unsure: B1+C2=3
    assert label["averaging"] == {"yes": pytest.approx(3 / 9), "no": pytest.approx(3 / 9),
                                  "unsure": pytest.approx(3 / 9)}
    # majority: A -> yes, B -> no, C -> unsure
    assert label["majority"] == {"yes": pytest.approx(1 / 3), "no": pytest.approx(1 / 3),
                                 "unsure": pytest.approx(1 / 3)}
    assert summary["tasks"]["grammaticality"]["mean"] == pytest.approx(13 / 3)
    assert sum(label["averaging"].values()) == pytest.approx(1.0, abs=1e-9)
    assert sum(label["majority"].values()) == pytest.approx(1.0, abs=1e-9)
    passed("annotation aggregation: averaging and majority shares match hand computation")


# ---------------------------------------------------------------------------
# Criterion 10: protocol conformance — wire run identical to in-process run.

def test_protocol_conformance():
    server = make_http_server(victim_request_handler(OverlapRanker(RankerConfig())))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        host, port = server.server_address[:2]
        base = ExperimentConfig(attack=AttackConfig(seed=3), fixture_dialogs=10,
                                fixture_rounds=2)
        local = run_experiment(replace(base, victim="builtin:overlap-q"))
        wire = run_experiment(replace(base, victim=f"http://{host}:{port}/"))
    finally:
        server.shutdown()
        server.server_close()
    assert wire.report.to_json() == local.report.to_json()
    log_local = [json.dumps(r, sort_keys=True) for r in local.records]
    log_wire = [json.dumps(r, sort_keys=True) for r in wire.records]
    assert log_wire == log_local
    passed(f"serve-victim over HTTP reproduces the in-process report "
           f"({local.report.n_instances} instances, bit-identical)")
