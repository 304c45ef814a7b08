"""The black-box attack loop for questions and dialog history.

Words are ranked by deletion importance (probability drop of the GT answer
when the word is removed), then tried in order: each word's top-k synonym
candidates are filtered through the constraint stack and scored against the
victim. A candidate that flips the top-ranked answer wins immediately (the
flipper with the highest sentence similarity is committed); otherwise the
candidate that most decreases the GT probability is committed if the
decrease is strict, and the loop moves to the next word. The random-word
baseline replaces importance order with a seeded shuffle.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .constraints import ConstraintConfig, GrammarChecker, ProtocolGrammarChecker, admissible
from .corpus import AttackInstance, HistorySegment, history_text, segment_history, segment_of
from .encoder import SimilarityScorer
from .lexsub import (
    EmbeddingTable,
    SynonymCandidate,
    SynonymProvider,
    Token,
    analyze,
    embedding_candidates,
    fixture_embeddings,
    mlm_candidates,
)
from .oracle import CandidateScores, HistoryParts, Oracle, Victim, probabilities, rank_of

TARGET_QUESTION = "question"
TARGET_HISTORY = "history"


@dataclass(frozen=True)
class AttackConfig:
    provider: str = "embedding"  # "embedding" | "mlm"
    k: int = 50
    constraints: ConstraintConfig = field(default_factory=ConstraintConfig)
    target: str = TARGET_QUESTION
    max_substitutions: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.provider not in ("embedding", "mlm"):
            raise ValueError(f"unknown provider {self.provider!r}")
        if self.target not in (TARGET_QUESTION, TARGET_HISTORY):
            raise ValueError(f"unknown target {self.target!r}")


@dataclass(frozen=True)
class Substitution:
    position: int
    original: str
    replacement: str
    provider_score: float
    similarity: float  # sentence similarity of the perturbed text vs the original
    segment: str | None = None  # history mode: which part of history was touched


@dataclass
class AttackResult:
    instance_id: str
    target: str
    attempted: bool
    success: bool
    original_text: str
    adversarial_text: str
    substitutions: list[Substitution]
    queries: int
    scores_before: CandidateScores
    scores_after: CandidateScores
    similarity_final: float
    attacked_segment: str | None
    gt_rank_before: int
    gt_rank_after: int
    p_gt_before: float
    p_gt_after: float
    answer_before: str
    answer_after: str
    token_count: int  # word tokens in the target text (Pert. denominator)


class AttackTools:
    """Bundles the synonym source, similarity scorer and grammar checker.

    The default is fully offline: the bundled 2-d embedding fixture serves
    both as synonym provider and as the sentence encoder.
    """

    def __init__(self, embeddings: EmbeddingTable | None = None,
                 mlm: SynonymProvider | None = None,
                 scorer: SimilarityScorer | None = None,
                 grammar: GrammarChecker | ProtocolGrammarChecker | None = None):
        self.embeddings = embeddings if embeddings is not None else fixture_embeddings()
        self.mlm = mlm
        self.scorer = scorer if scorer is not None else SimilarityScorer(table=self.embeddings)
        self.grammar = grammar

    def candidates(self, cfg: AttackConfig, tokens: list[Token], position: int) -> list[SynonymCandidate]:
        if cfg.provider == "mlm":
            if self.mlm is None:
                raise ValueError("provider 'mlm' configured but no MLM provider given")
            return mlm_candidates(tokens, position, cfg.k, self.mlm)
        return embedding_candidates(tokens[position].lower, self.embeddings, cfg.k)


@dataclass
class _Target:
    """A prepared attack surface: raw text, tagged tokens, history segments."""

    mode: str
    raw: str
    tokens: list[Token]
    segments: list[HistorySegment] | None  # None in question mode


def prepare_target(instance: AttackInstance, mode: str) -> _Target:
    if mode == TARGET_QUESTION:
        return _Target(mode=mode, raw=instance.question, tokens=analyze(instance.question),
                       segments=None)
    tokens, segments = segment_history(instance)
    return _Target(mode=TARGET_HISTORY, raw=history_text(instance), tokens=tokens,
                   segments=segments)


def _splice(raw: str, tokens: list[Token], replacements: dict[int, str | None]) -> str:
    """Rebuild raw text with token replacements (None deletes the token)."""
    out = []
    cursor = 0
    for idx, token in enumerate(tokens):
        if idx in replacements:
            out.append(raw[cursor:token.start])
            repl = replacements[idx]
            if repl is not None:
                out.append(repl)
            cursor = token.end
    out.append(raw[cursor:])
    return "".join(out)


def _segment_override(target: _Target, replacements: dict[int, str | None]) -> HistoryParts:
    """Re-splice perturbed history tokens back into their caption/QA parts."""
    assert target.segments is not None
    part_texts = []
    for seg in target.segments:
        seg_tokens = target.tokens[seg.start:seg.end]
        if seg_tokens:
            lo = seg_tokens[0].start
            seg_raw = target.raw[lo:seg_tokens[-1].end]
            local = [
                Token(t.surface, t.lower, t.start - lo, t.end - lo, t.is_stopword, t.pos)
                for t in seg_tokens
            ]
            seg_repl = {
                i - seg.start: word
                for i, word in replacements.items()
                if seg.start <= i < seg.end
            }
            part_texts.append(_splice(seg_raw, local, seg_repl))
        else:
            part_texts.append("")
    caption = part_texts[0]
    pairs = tuple(
        (part_texts[i], part_texts[i + 1]) for i in range(1, len(part_texts) - 1, 2)
    )
    return HistoryParts(caption=caption, pairs=pairs)


def _overrides(target: _Target, replacements: dict[int, str | None]) -> dict:
    if target.mode == TARGET_QUESTION:
        return {"question": _splice(target.raw, target.tokens, replacements)}
    return {"history": _segment_override(target, replacements)}


def _attackable_positions(target: _Target, include_stopwords: bool) -> list[int]:
    positions = []
    for idx, token in enumerate(target.tokens):
        if not token.is_word or token.pos == "NUM":
            continue
        if token.is_stopword and not include_stopwords:
            continue
        positions.append(idx)
    return positions


def _importance_order(instance: AttackInstance, oracle: Oracle, target: _Target,
                      positions: list[int], scores_before: CandidateScores) -> list[tuple[int, float]]:
    """Deletion-based importance, descending; ties broken by earlier position."""
    gt = instance.gt_index
    p_before = probabilities(scores_before)[gt]
    top_before = scores_before.top1()
    ranked = []
    for pos in positions:
        deletion = {pos: None}
        remaining = [t for i, t in enumerate(target.tokens) if i != pos]
        if not any(t.is_word for t in remaining):
            # Deleting the only word would leave an empty override; the token
            # stays attackable (substitution still applies) at importance 0.
            ranked.append((pos, 0.0))
            continue
        scores_del = oracle.score(instance, **_overrides(target, deletion))
        importance = p_before - probabilities(scores_del)[gt]
        if top_before == gt and scores_del.top1() != gt:
            importance += 1.0
        ranked.append((pos, importance))
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked


def word_importance(instance: AttackInstance, oracle: Oracle, target: str = TARGET_QUESTION,
                    *, include_stopwords: bool = False) -> list[tuple[int, float]]:
    """Rank attackable token positions by deletion importance.

    Spends 1 baseline query plus one query per attackable token. Returns an
    empty list when nothing is attackable (the attack is then reported
    unsuccessful with the queries already spent).
    """
    prepared = prepare_target(instance, target)
    scores_before = oracle.score(instance)
    positions = _attackable_positions(prepared, include_stopwords)
    if not positions:
        return []
    return _importance_order(instance, oracle, prepared, positions, scores_before)


def _result(instance: AttackInstance, target: _Target, *, attempted: bool, success: bool,
            replacements: dict[int, str], substitutions: list[Substitution], oracle: Oracle,
            scores_before: CandidateScores, scores_after: CandidateScores,
            tools: AttackTools) -> AttackResult:
    adversarial = _splice(target.raw, target.tokens, dict(replacements))
    gt = instance.gt_index
    similarity = tools.scorer.similarity(target.raw, adversarial) if substitutions else 1.0
    first_segment = substitutions[0].segment if substitutions else None
    return AttackResult(
        instance_id=instance.instance_id,
        target=target.mode,
        attempted=attempted,
        success=success,
        original_text=target.raw,
        adversarial_text=adversarial,
        substitutions=substitutions,
        queries=oracle.queries,
        scores_before=scores_before,
        scores_after=scores_after,
        similarity_final=similarity,
        attacked_segment=first_segment if target.mode == TARGET_HISTORY else None,
        gt_rank_before=rank_of(scores_before, gt),
        gt_rank_after=rank_of(scores_after, gt),
        p_gt_before=probabilities(scores_before)[gt],
        p_gt_after=probabilities(scores_after)[gt],
        answer_before=instance.candidates[scores_before.top1()],
        answer_after=instance.candidates[scores_after.top1()],
        token_count=sum(1 for t in target.tokens if t.is_word),
    )


def _run_attack(instance: AttackInstance, victim: Victim, cfg: AttackConfig,
                tools: AttackTools, *, order: str) -> AttackResult:
    oracle = Oracle(victim)
    try:
        return _attack_loop(instance, oracle, cfg, tools, order=order)
    except Exception as exc:
        # Partial telemetry for aborted attacks (e.g. victim transport loss).
        exc.instance_id = instance.instance_id
        exc.queries_spent = oracle.queries
        raise


def _attack_loop(instance: AttackInstance, oracle: Oracle, cfg: AttackConfig,
                 tools: AttackTools, *, order: str) -> AttackResult:
    target = prepare_target(instance, cfg.target)
    gt = instance.gt_index

    scores_before = oracle.score(instance)
    p_before = probabilities(scores_before)[gt]

    if cfg.target == TARGET_QUESTION and scores_before.top1() != gt:
        # The victim is already wrong; skip and exclude from success stats.
        return _result(instance, target, attempted=False, success=False, replacements={},
                       substitutions=[], oracle=oracle, scores_before=scores_before,
                       scores_after=scores_before, tools=tools)

    positions = _attackable_positions(target, include_stopwords=not cfg.constraints.use_stopwords)
    if not positions:
        return _result(instance, target, attempted=False, success=False, replacements={},
                       substitutions=[], oracle=oracle, scores_before=scores_before,
                       scores_after=scores_before, tools=tools)

    if order == "importance":
        ordered = [pos for pos, _ in _importance_order(instance, oracle, target,
                                                       positions, scores_before)]
    else:
        rng = random.Random(f"{cfg.seed}:{instance.instance_id}")
        ordered = list(positions)
        rng.shuffle(ordered)

    committed: dict[int, str] = {}
    substitutions: list[Substitution] = []
    scores_current = scores_before
    p_current = p_before

    for pos in ordered:
        original_token = target.tokens[pos]
        candidates = tools.candidates(cfg, target.tokens, pos)
        evaluated = []  # (candidate, text, replacement map, scores, p_gt)
        for cand in candidates:
            trial = {**committed, pos: cand.word}
            trial_text = _splice(target.raw, target.tokens, dict(trial))
            decision = admissible(original_token, cand, target.raw, trial_text,
                                  cfg.constraints, scorer=tools.scorer, grammar=tools.grammar)
            if not decision:
                continue
            scores = oracle.score(instance, **_overrides(target, dict(trial)))
            evaluated.append((cand, trial_text, trial, scores, probabilities(scores)[gt]))

        if cfg.target == TARGET_QUESTION:
            winners = [e for e in evaluated if e[3].top1() != gt]
        else:
            winners = [e for e in evaluated if e[4] < p_before]

        if winners:
            # Among attack-completing candidates, keep the most similar text.
            best = max(winners, key=lambda e: tools.scorer.similarity(target.raw, e[1]))
            cand, text, trial, scores, p = best
            committed = trial
            substitutions.append(Substitution(
                position=pos, original=original_token.surface, replacement=cand.word,
                provider_score=cand.provider_score,
                similarity=tools.scorer.similarity(target.raw, text),
                segment=segment_of(target.segments, pos) if target.segments else None,
            ))
            return _result(instance, target, attempted=True, success=True,
                           replacements=committed, substitutions=substitutions,
                           oracle=oracle, scores_before=scores_before, scores_after=scores,
                           tools=tools)

        if cfg.target == TARGET_QUESTION and evaluated:
            cand, text, trial, scores, p = min(evaluated, key=lambda e: e[4])
            if p < p_current:
                committed = trial
                scores_current = scores
                p_current = p
                substitutions.append(Substitution(
                    position=pos, original=original_token.surface, replacement=cand.word,
                    provider_score=cand.provider_score,
                    similarity=tools.scorer.similarity(target.raw, text),
                    segment=None,
                ))
                if cfg.max_substitutions is not None and len(substitutions) >= cfg.max_substitutions:
                    break

    return _result(instance, target, attempted=True, success=False, replacements=committed,
                   substitutions=substitutions, oracle=oracle, scores_before=scores_before,
                   scores_after=scores_current, tools=tools)


def attack_question(instance: AttackInstance, victim: Victim, cfg: AttackConfig,
                    tools: AttackTools | None = None) -> AttackResult:
    """Attack the question; success means the top-ranked answer left the GT."""
    if cfg.target != TARGET_QUESTION:
        cfg = replace(cfg, target=TARGET_QUESTION)
    return _run_attack(instance, victim, cfg, tools or AttackTools(), order="importance")


def attack_history(instance: AttackInstance, victim: Victim, cfg: AttackConfig,
                   tools: AttackTools | None = None) -> AttackResult:
    """Attack the concatenated history; success means the GT probability drops.

    The top-1 prediction need not change. The first committed substitution's
    segment (caption / user question / system answer) is recorded.
    """
    if cfg.target != TARGET_HISTORY:
        cfg = replace(cfg, target=TARGET_HISTORY)
    return _run_attack(instance, victim, cfg, tools or AttackTools(), order="importance")


def random_word_attack(instance: AttackInstance, victim: Victim, cfg: AttackConfig,
                       tools: AttackTools | None = None) -> AttackResult:
    """Baseline: importance ranking replaced by a seeded uniform shuffle."""
    return _run_attack(instance, victim, cfg, tools or AttackTools(), order="random")
