"""The black-box victim interface: score 100 candidate answers for a query.

A victim is anything with ``score_query(ScoreQuery) -> CandidateScores``:
the deterministic built-in token-overlap rankers (stand-ins for real models
with different input channels), or a remote model behind the wire protocol.
:class:`Oracle` wraps a victim with the per-attack query counter and applies
question/history overrides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

import numpy as np

from . import protocol
from .corpus import AttackInstance, N_CANDIDATES
from .lexsub import tokenize
from .protocol import PROTOCOL_VERSION, ProtocolError, TransportError


@dataclass(frozen=True)
class CandidateScores:
    """The victim's observable output F(X): one finite score per candidate.

    ``normalized`` is the victim's protocol capability flag: True means the
    scores are already probabilities and softmax must be skipped.
    """

    scores: tuple[float, ...]
    normalized: bool = False

    def __post_init__(self):
        if len(self.scores) != N_CANDIDATES:
            raise ValueError(f"expected {N_CANDIDATES} scores, got {len(self.scores)}")
        if not all(math.isfinite(s) for s in self.scores):
            raise ValueError("scores must all be finite")

    def top1(self) -> int:
        """Index of the best candidate; ties go to the smaller index."""
        return max(range(N_CANDIDATES), key=lambda i: (self.scores[i], -i))


@dataclass(frozen=True)
class RankerConfig:
    """Input-channel toggles for the built-in rankers (question channel is always on)."""

    use_image: bool = False
    use_history: bool = False
    history_weight: float = 1.0
    image_weight: float = 1.0

    def __post_init__(self):
        if self.history_weight < 0 or self.image_weight < 0:
            raise ValueError("channel weights must be >= 0")


class QueryCounter:
    """Counts oracle calls within one attack; reset per attack."""

    def __init__(self):
        self.count = 0

    def increment(self) -> None:
        self.count += 1


@dataclass(frozen=True)
class HistoryParts:
    """A (possibly perturbed) history override, kept structured for the wire."""

    caption: str
    pairs: tuple[tuple[str, str], ...] = ()

    def text(self) -> str:
        parts = [self.caption]
        for q, a in self.pairs:
            parts.append(q)
            parts.append(a)
        return " ".join(parts)


@dataclass(frozen=True)
class ScoreQuery:
    """Everything a victim may look at. Deliberately excludes the GT label."""

    question: str
    candidates: tuple[str, ...]
    image_id: str = ""
    image_tags: tuple[str, ...] = ()
    caption: str = ""
    history: tuple[tuple[str, str], ...] = ()

    def history_text(self) -> str:
        parts = [self.caption]
        for q, a in self.history:
            parts.append(q)
            parts.append(a)
        return " ".join(parts)


class Victim(Protocol):
    def score_query(self, query: ScoreQuery) -> CandidateScores: ...


def query_for(instance: AttackInstance, question: str | None = None,
              history: HistoryParts | None = None) -> ScoreQuery:
    """Build the victim query for an instance, applying optional overrides."""
    if history is None:
        caption = instance.dialog.caption
        pairs = instance.history_pairs
    else:
        caption = history.caption
        pairs = history.pairs
    return ScoreQuery(
        question=instance.question if question is None else question,
        candidates=instance.candidates,
        image_id=instance.dialog.image_id,
        image_tags=instance.dialog.image_tags,
        caption=caption,
        history=pairs,
    )


@lru_cache(maxsize=200_000)
def _token_set(text: str) -> frozenset[str]:
    return frozenset(t.lower for t in tokenize(text))


class OverlapRanker:
    """Deterministic reference victim scoring lexical overlap per input channel.

    score(c) = |tok(c) & tok(Q)|
             + image_weight  * |tok(c) & image_tags| * [use_image]
             + history_weight* |tok(c) & tok(H)|     * [use_history]
             - 1e-6 * index(c)

    Token sets are lowercased with stopwords retained; the index term makes
    ties deterministic. Stands in for real victims whose input channels are
    ablated the same way.
    """

    def __init__(self, config: RankerConfig | None = None):
        self.config = config or RankerConfig()

    def score_query(self, query: ScoreQuery) -> CandidateScores:
        q_tokens = _token_set(query.question)
        tag_tokens = frozenset(t.lower() for t in query.image_tags)
        h_tokens = _token_set(query.history_text()) if self.config.use_history else frozenset()
        scores = []
        for idx, cand in enumerate(query.candidates):
            c_tokens = _token_set(cand)
            s = float(len(c_tokens & q_tokens))
            if self.config.use_image:
                s += self.config.image_weight * len(c_tokens & tag_tokens)
            if self.config.use_history:
                s += self.config.history_weight * len(c_tokens & h_tokens)
            scores.append(s - 1e-6 * idx)
        return CandidateScores(tuple(scores))


def overlap_ranker_score(instance: AttackInstance, config: RankerConfig) -> CandidateScores:
    """Functional form of the built-in ranker on an unperturbed instance."""
    return OverlapRanker(config).score_query(query_for(instance))


class ProtocolVictim:
    """Client side of the victim wire protocol.

    Request:  {protocol_version, image_id, image_tags?, caption,
               history: [{q, a}...], question, candidates: [100 strings]}
    Response: {scores: [100 numbers], normalized: bool}
    """

    def __init__(self, transport):
        self.transport = transport

    def score_query(self, query: ScoreQuery) -> CandidateScores:
        payload = {
            "protocol_version": PROTOCOL_VERSION,
            "image_id": query.image_id,
            "image_tags": list(query.image_tags),
            "caption": query.caption,
            "history": [{"q": q, "a": a} for q, a in query.history],
            "question": query.question,
            "candidates": list(query.candidates),
        }
        response = self.transport.request(payload)
        scores = response.get("scores")
        if not isinstance(scores, list) or len(scores) != N_CANDIDATES:
            got = len(scores) if isinstance(scores, list) else type(scores).__name__
            raise ProtocolError(f"expected {N_CANDIDATES} scores, got {got}")
        try:
            values = tuple(float(s) for s in scores)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"non-numeric score in response: {exc}") from exc
        try:
            return CandidateScores(values, normalized=bool(response.get("normalized", False)))
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc


def victim_request_handler(victim: Victim):
    """Server side: adapt a victim to the wire protocol request schema."""

    def handle(request: dict) -> dict:
        protocol.require_version(request)
        candidates = request.get("candidates")
        if not isinstance(candidates, list) or len(candidates) != N_CANDIDATES:
            raise ProtocolError(f"request must carry exactly {N_CANDIDATES} candidates")
        try:
            history = tuple(
                (str(h["q"]), str(h["a"])) for h in request.get("history") or ()
            )
        except (TypeError, KeyError) as exc:
            raise ProtocolError(f"malformed history entry: {exc}") from exc
        query = ScoreQuery(
            question=str(request.get("question", "")),
            candidates=tuple(str(c) for c in candidates),
            image_id=str(request.get("image_id", "")),
            image_tags=tuple(str(t) for t in request.get("image_tags") or ()),
            caption=str(request.get("caption", "")),
            history=history,
        )
        result = victim.score_query(query)
        return {"scores": list(result.scores), "normalized": result.normalized}

    return handle


class Oracle:
    """Per-attack wrapper owning the query counter.

    Each attack constructs its own Oracle around the shared victim, so
    attacks parallelize per instance with no shared mutable state.
    """

    def __init__(self, victim: Victim):
        self.victim = victim
        self.counter = QueryCounter()

    @property
    def queries(self) -> int:
        return self.counter.count

    def score(self, instance: AttackInstance, question: str | None = None,
              history: HistoryParts | None = None) -> CandidateScores:
        if question is not None and not tokenize(question):
            raise ValueError("question override must be a non-empty token sequence")
        if history is not None and not tokenize(history.text()):
            raise ValueError("history override must be a non-empty token sequence")
        self.counter.increment()
        return self.victim.score_query(query_for(instance, question, history))

    def gt_probability(self, scores: CandidateScores, gt_index: int) -> float:
        return probabilities(scores)[gt_index]


def rank_of(scores: CandidateScores, gt_index: int) -> int:
    """1-based rank of the GT candidate; equal scores break by smaller index."""
    gt = scores.scores[gt_index]
    rank = 1
    for idx, s in enumerate(scores.scores):
        if s > gt or (s == gt and idx < gt_index):
            rank += 1
    return rank


def softmax_probs(scores: CandidateScores) -> list[float]:
    """Softmax with max-subtraction; probabilities > 0 summing to 1 within 1e-12."""
    arr = np.asarray(scores.scores, dtype=np.float64)
    arr = np.exp(arr - arr.max())
    arr /= arr.sum()
    return [float(p) for p in arr]


def probabilities(scores: CandidateScores) -> list[float]:
    """Candidate probabilities honoring the victim's normalized capability flag."""
    if scores.normalized:
        return [float(s) for s in scores.scores]
    return softmax_probs(scores)


__all__ = [
    "CandidateScores", "RankerConfig", "QueryCounter", "HistoryParts",
    "ScoreQuery", "Victim", "query_for", "OverlapRanker", "overlap_ranker_score",
    "ProtocolVictim", "victim_request_handler", "Oracle", "rank_of",
    "softmax_probs", "probabilities", "TransportError", "ProtocolError",
]
