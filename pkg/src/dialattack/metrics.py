"""Ranking and uncertainty metrics, before/after deltas, attack-cost aggregates.

Empty inputs yield ``None`` ("absent") rather than raising, so reports over
zero eligible instances stay well-formed.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .attack import AttackResult
from .oracle import CandidateScores

METRIC_NAMES = ("R@1", "R@5", "R@10", "MRR", "NDCG", "PPL")


def recall_at_k(ranks: Sequence[int], k: int) -> float | None:
    """Fraction of ranks <= k; None on an empty list."""
    if not ranks:
        return None
    return sum(1 for r in ranks if r <= k) / len(ranks)


def mrr(ranks: Sequence[int]) -> float | None:
    """Mean reciprocal rank; None on an empty list."""
    if not ranks:
        return None
    return sum(1.0 / r for r in ranks) / len(ranks)


def ndcg(scores: CandidateScores, relevance: Sequence[float]) -> float:
    """NDCG at K = number of positive-relevance candidates.

    Candidates are ranked by score with index tie-break; DCG sums the
    relevance of the top-K predicted candidates discounted by log2(i+1), and
    is normalized by the same sum over relevance sorted descending.
    """
    if len(relevance) != len(scores.scores):
        raise ValueError("relevance length does not match scores")
    k = sum(1 for r in relevance if r > 0)
    if k == 0:
        raise ValueError("all-zero relevance (instance should have been filtered)")
    order = sorted(range(len(scores.scores)), key=lambda i: (-scores.scores[i], i))
    dcg = sum(relevance[order[i]] / math.log2(i + 2) for i in range(k))
    ideal = sorted(relevance, reverse=True)
    idcg = sum(ideal[i] / math.log2(i + 2) for i in range(k))
    return dcg / idcg


def perplexity(gt_probs: Sequence[float]) -> float | None:
    """Corpus perplexity of the GT answer: 2 ** mean(-log2 p).

    A uniform victim over 100 candidates scores exactly 100; certain victims
    score 1. Probabilities outside (0, 1] are a domain error.
    """
    if not gt_probs:
        return None
    for p in gt_probs:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"probability {p} outside (0, 1]")
    return 2.0 ** (-sum(math.log2(p) for p in gt_probs) / len(gt_probs))


@dataclass(frozen=True)
class MetricSet:
    """One side (before or after) of a report, with its population sizes."""

    values: dict[str, float | None]
    n: int
    n_ndcg: int


def compute_metric_set(ranks: Sequence[int], gt_probs: Sequence[float],
                       ndcg_values: Sequence[float]) -> MetricSet:
    values: dict[str, float | None] = {
        "R@1": recall_at_k(ranks, 1),
        "R@5": recall_at_k(ranks, 5),
        "R@10": recall_at_k(ranks, 10),
        "MRR": mrr(ranks),
        "NDCG": (sum(ndcg_values) / len(ndcg_values)) if ndcg_values else None,
        "PPL": perplexity(gt_probs),
    }
    return MetricSet(values=values, n=len(ranks), n_ndcg=len(ndcg_values))


@dataclass(frozen=True)
class Aggregates:
    pert_percent: float | None
    mean_similarity: float | None
    mean_queries: float | None
    success_rate: float | None
    n_instances: int
    n_attempted: int
    n_success: int


def attack_aggregates(results: Iterable[AttackResult]) -> Aggregates:
    """Perturbation share, similarity and query cost over an attack run.

    pert is averaged over instances that actually committed substitutions,
    similarity over successful attacks, queries over attempted attacks.
    """
    results = list(results)
    perts = [
        100.0 * len(r.substitutions) / r.token_count
        for r in results
        if r.substitutions and r.token_count
    ]
    sims = [100.0 * r.similarity_final for r in results if r.success]
    queries = [r.queries for r in results if r.attempted]
    n_attempted = sum(1 for r in results if r.attempted)
    n_success = sum(1 for r in results if r.success)
    return Aggregates(
        pert_percent=sum(perts) / len(perts) if perts else None,
        mean_similarity=sum(sims) / len(sims) if sims else None,
        mean_queries=sum(queries) / len(queries) if queries else None,
        success_rate=n_success / n_attempted if n_attempted else None,
        n_instances=len(results),
        n_attempted=n_attempted,
        n_success=n_success,
    )


@dataclass(frozen=True)
class MetricDelta:
    before: float | None
    after: float | None
    relative_delta_percent: float | None


def relative_delta(before: float | None, after: float | None) -> float | None:
    if before is None or after is None or before == 0:
        return None
    return 100.0 * (after - before) / before


@dataclass
class RobustnessReport:
    """Aggregated before/after metrics plus the attack-cost columns."""

    metrics: dict[str, MetricDelta]
    pert_percent: float | None
    mean_semantic_similarity: float | None
    mean_queries: float | None
    success_rate: float | None
    n_instances: int
    n_attempted: int
    n_success: int
    n_ndcg: int
    ppl_axis: str = "round"

    def to_dict(self) -> dict:
        return {
            "metrics": {
                name: {
                    "before": d.before,
                    "after": d.after,
                    "relative_delta_percent": d.relative_delta_percent,
                }
                for name, d in self.metrics.items()
            },
            "pert_percent": self.pert_percent,
            "mean_semantic_similarity": self.mean_semantic_similarity,
            "mean_queries": self.mean_queries,
            "success_rate": self.success_rate,
            "n_instances": self.n_instances,
            "n_attempted": self.n_attempted,
            "n_success": self.n_success,
            "n_ndcg": self.n_ndcg,
            "ppl_axis": self.ppl_axis,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @staticmethod
    def csv_header() -> list[str]:
        cols = []
        for name in METRIC_NAMES:
            cols += [f"Orig.{name}", f"Aft.{name}", f"Delta.{name}(%)"]
        cols += ["Pert.", "S.S.", "Quer.", "Success", "N", "Attempted", "Succeeded", "N.NDCG"]
        return cols

    def csv_row(self) -> list:
        def fmt(x):
            return "" if x is None else round(x, 6)

        row: list = []
        for name in METRIC_NAMES:
            d = self.metrics[name]
            row += [fmt(d.before), fmt(d.after), fmt(d.relative_delta_percent)]
        row += [
            fmt(self.pert_percent), fmt(self.mean_semantic_similarity),
            fmt(self.mean_queries), fmt(self.success_rate),
            self.n_instances, self.n_attempted, self.n_success, self.n_ndcg,
        ]
        return row

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(self.csv_header())
        writer.writerow(self.csv_row())
        return buf.getvalue()

    def format_table(self) -> str:
        def fmt(x, scale=1.0):
            return "-" if x is None else f"{x * scale:.1f}"

        lines = [
            f"{'metric':<6} {'orig':>8} {'after':>8} {'delta%':>8}",
        ]
        for name in METRIC_NAMES:
            d = self.metrics[name]
            scale = 100.0 if name != "PPL" else 1.0
            lines.append(
                f"{name:<6} {fmt(d.before, scale):>8} {fmt(d.after, scale):>8} "
                f"{fmt(d.relative_delta_percent):>8}"
            )
        lines.append(
            f"Pert. {fmt(self.pert_percent)}  S.S. {fmt(self.mean_semantic_similarity)}  "
            f"Quer. {fmt(self.mean_queries)}  success {self.n_success}/{self.n_attempted} "
            f"of {self.n_instances} (NDCG over {self.n_ndcg})"
        )
        return "\n".join(lines)


def build_report(before: MetricSet, after: MetricSet, aggregates: Aggregates) -> RobustnessReport:
    """Join before/after metric sets computed on identical instance sets."""
    if before.n != after.n or before.n_ndcg != after.n_ndcg:
        raise ValueError(
            f"metric sets cover different instances: before n={before.n}/{before.n_ndcg}, "
            f"after n={after.n}/{after.n_ndcg}"
        )
    metrics = {
        name: MetricDelta(
            before=before.values[name],
            after=after.values[name],
            relative_delta_percent=relative_delta(before.values[name], after.values[name]),
        )
        for name in METRIC_NAMES
    }
    return RobustnessReport(
        metrics=metrics,
        pert_percent=aggregates.pert_percent,
        mean_semantic_similarity=aggregates.mean_similarity,
        mean_queries=aggregates.mean_queries,
        success_rate=aggregates.success_rate,
        n_instances=aggregates.n_instances,
        n_attempted=aggregates.n_attempted,
        n_success=aggregates.n_success,
        n_ndcg=before.n_ndcg,
    )
