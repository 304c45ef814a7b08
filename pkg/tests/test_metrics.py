import math
import random

import pytest

from dialattack.metrics import (
    Aggregates,
    attack_aggregates,
    build_report,
    compute_metric_set,
    mrr,
    ndcg,
    perplexity,
    recall_at_k,
    relative_delta,
)
from dialattack.oracle import CandidateScores


def scores_for_order(order):
    """CandidateScores ranking the given indices first, in order."""
    values = [0.0] * 100
    for rank, idx in enumerate(order):
        values[idx] = float(len(order) - rank)
    return CandidateScores(tuple(values))


class TestRecall:
    def test_direct_count(self):
        assert recall_at_k([1, 6, 3], 5) == pytest.approx(2 / 3)

    def test_all_rank_one(self):
        assert recall_at_k([1] * 7, 10) == 1.0

    def test_k_covers_everything(self):
        assert recall_at_k(list(range(1, 101)), 100) == 1.0

    def test_empty_absent(self):
        assert recall_at_k([], 5) is None


class TestMrr:
    def test_single(self):
        assert mrr([1]) == 1.0

    def test_hand_values(self):
        assert mrr([1, 2, 4]) == pytest.approx((1 + 0.5 + 0.25) / 3)
        assert mrr([2, 4]) == pytest.approx(0.375)

    def test_empty_absent(self):
        assert mrr([]) is None


class TestNdcg:
    def test_worked_example(self):
        # relevance {A:1.0, B:0.5, C:0, D:0}, predicted order [C, A, B, D]
        relevance = [1.0, 0.5, 0.0, 0.0] + [0.0] * 96
        scores = scores_for_order([2, 0, 1, 3])
        value = ndcg(scores, relevance)
        dcg = 0.0 / math.log2(2) + 1.0 / math.log2(3)
        idcg = 1.0 / math.log2(2) + 0.5 / math.log2(3)
        assert value == pytest.approx(dcg / idcg, abs=1e-9)
        assert value == pytest.approx(0.47962, abs=1e-5)

    def test_ideal_order_is_one(self):
        relevance = [1.0, 0.5] + [0.0] * 98
        assert ndcg(scores_for_order([0, 1]), relevance) == pytest.approx(1.0)

    def test_single_relevant_at_rank_one(self):
        relevance = [1.0] + [0.0] * 99
        assert ndcg(scores_for_order([0]), relevance) == 1.0

    def test_all_zero_relevance_is_error(self):
        with pytest.raises(ValueError, match="all-zero"):
            ndcg(scores_for_order([0]), [0.0] * 100)

    def test_range_and_ideal_criterion(self):
        rng = random.Random(17)
        for _ in range(50):
            relevance = [0.0] * 100
            for idx in rng.sample(range(100), rng.randint(1, 6)):
                relevance[idx] = rng.choice([0.25, 0.5, 1.0])
            order = list(range(100))
            rng.shuffle(order)
            value = ndcg(scores_for_order(order), relevance)
            assert 0.0 <= value <= 1.0 + 1e-12


class TestPerplexity:
    def test_uniform_victim_is_100(self):
        assert perplexity([0.01] * 37) == pytest.approx(100.0, abs=1e-9)

    def test_certain_victim_is_1(self):
        assert perplexity([1.0, 1.0]) == 1.0

    def test_hand_value(self):
        assert perplexity([0.5, 0.25]) == pytest.approx(2.0 ** 1.5, abs=1e-9)
        assert perplexity([0.5, 0.25]) == pytest.approx(2.82843, abs=1e-5)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            perplexity([0.5, 0.0])
        with pytest.raises(ValueError):
            perplexity([-0.1])

    def test_empty_absent(self):
        assert perplexity([]) is None


class TestBruteForceEquivalence:
    def test_200_random_instances(self):
        rng = random.Random(2024)
        for _ in range(200):
            n = rng.randint(1, 60)
            ranks = [rng.randint(1, 100) for _ in range(n)]
            for k in (1, 5, 10):
                brute = sum(1 for r in ranks if r <= k) / len(ranks)
                assert abs(recall_at_k(ranks, k) - brute) < 1e-9
            brute_mrr = sum(1.0 / r for r in ranks) / len(ranks)
            assert abs(mrr(ranks) - brute_mrr) < 1e-9

            values = [rng.random() for _ in range(100)]
            relevance = [0.0] * 100
            for idx in rng.sample(range(100), rng.randint(1, 8)):
                relevance[idx] = rng.choice([0.2, 0.5, 0.8, 1.0])
            scores = CandidateScores(tuple(values))
            # independent oracle: explicit permutation sort then direct formula
            perm = sorted(range(100), key=lambda i: (-values[i], i))
            kk = sum(1 for r in relevance if r > 0)
            brute_dcg = sum(relevance[perm[i]] / math.log2(i + 2) for i in range(kk))
            ideal = sorted(relevance, reverse=True)
            brute_idcg = sum(ideal[i] / math.log2(i + 2) for i in range(kk))
            assert abs(ndcg(scores, relevance) - brute_dcg / brute_idcg) < 1e-9


class TestAggregatesAndReport:
    def test_pert_on_six_token_question(self):
        from dialattack.attack import AttackResult, Substitution

        scores = scores_for_order([0])
        result = AttackResult(
            instance_id="a:1", target="question", attempted=True, success=True,
            original_text="is the red ball in box", adversarial_text="is the rosy ball in box",
            substitutions=[Substitution(2, "red", "rosy", 0.9, 0.95)],
            queries=7, scores_before=scores, scores_after=scores, similarity_final=0.95,
            attacked_segment=None, gt_rank_before=1, gt_rank_after=2,
            p_gt_before=0.4, p_gt_after=0.2, answer_before="x", answer_after="y",
            token_count=6,
        )
        agg = attack_aggregates([result])
        assert agg.pert_percent == pytest.approx(100.0 / 6.0, abs=1e-9)
        assert agg.mean_similarity == pytest.approx(95.0)
        assert agg.mean_queries == 7
        assert agg.success_rate == 1.0

    def test_zero_attempted_all_absent(self):
        agg = attack_aggregates([])
        assert agg.pert_percent is None and agg.mean_similarity is None
        assert agg.mean_queries is None and agg.success_rate is None

    def test_relative_delta_paper_rows(self):
        # 50.0 -> 45.2 gives -9.6%; 46.6 -> 36.1 gives -22.5%
        assert relative_delta(50.0, 45.2) == pytest.approx(-9.6, abs=1e-9)
        assert round(relative_delta(46.6, 36.1), 1) == -22.5

    def test_before_equals_after_zero_delta(self):
        assert relative_delta(59.6, 59.6) == 0.0

    def test_build_report_and_serialization(self):
        before = compute_metric_set([1, 2], [0.5, 0.25], [1.0])
        after = compute_metric_set([2, 3], [0.25, 0.125], [0.8])
        agg = Aggregates(pert_percent=16.7, mean_similarity=74.8, mean_queries=5.2,
                         success_rate=0.5, n_instances=2, n_attempted=2, n_success=1)
        report = build_report(before, after, agg)
        assert report.metrics["R@1"].before == 0.5
        assert report.metrics["PPL"].before == pytest.approx(2.0 ** 1.5)
        data = report.to_dict()
        assert data["n_success"] == 1
        csv_text = report.to_csv()
        assert "Orig.R@1" in csv_text and "Quer." in csv_text
        assert "PPL" in report.format_table()

    def test_mismatched_instance_sets_error(self):
        before = compute_metric_set([1, 2], [0.5, 0.25], [])
        after = compute_metric_set([2], [0.25], [])
        agg = attack_aggregates([])
        with pytest.raises(ValueError, match="different instances"):
            build_report(before, after, agg)
