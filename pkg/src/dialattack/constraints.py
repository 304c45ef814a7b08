"""The admissibility stack applied to every substitution candidate.

Four individually toggleable checks: source-word stopword filtering, POS
consistency, a sentence-similarity threshold, and a grammar delta check.
Similarity and grammar are both anchored to the unperturbed original text so
chained substitutions cannot drift, and pre-existing grammar problems in
user text never block an attack.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .encoder import SimilarityScorer
from .lexsub import SynonymCandidate, Token, tokenize
from .protocol import PROTOCOL_VERSION, ProtocolError

REJECT_STOPWORD = "stopword_source"
REJECT_POS = "pos_mismatch"
REJECT_SIMILARITY = "low_similarity"
REJECT_GRAMMAR = "grammar"


@dataclass(frozen=True)
class ConstraintConfig:
    """Toggles mirroring the quality-constraint ablation rows.

    ``sim_threshold`` is the admissibility floor on sentence similarity
    (None disables the check); 0.5 is the standard operating point.
    """

    use_stopwords: bool = True
    use_pos: bool = True
    sim_threshold: float | None = 0.5
    use_grammar: bool = False

    def __post_init__(self):
        if self.sim_threshold is not None and not 0.0 <= self.sim_threshold <= 1.0:
            raise ValueError(f"sim_threshold {self.sim_threshold} outside [0, 1]")


RAW_CONSTRAINTS = ConstraintConfig(use_stopwords=False, use_pos=False,
                                   sim_threshold=None, use_grammar=False)


@dataclass(frozen=True)
class Decision:
    admit: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.admit


ADMIT = Decision(admit=True)


@dataclass(frozen=True)
class Violation:
    rule_id: str
    start: int
    end: int


# Vowel-letter words pronounced with a consonant sound ("a user"), and
# consonant-letter words pronounced with a vowel sound ("an hour").
_CONSONANT_SOUND = frozenset(
    "one once user unicorn unique unit united university uniform useful usual "
    "usually eulogy european ewe utensil utility ufo".split()
)
_VOWEL_SOUND = frozenset("hour hourly honest honestly honor honour heir herb".split())

# -er words that are not comparatives, for the double-comparative rule.
_NOT_COMPARATIVE = frozenset(
    "other another over under never ever after water paper corner summer winter "
    "dinner flower answer number letter teacher player rather either neither "
    "together super either upper lower inner outer".split()
)


def _starts_with_vowel_sound(word: str) -> bool:
    lower = word.lower()
    if lower in _CONSONANT_SOUND:
        return False
    if lower in _VOWEL_SOUND:
        return True
    return lower[:1] in "aeiou"


def _looks_comparative(word: str) -> bool:
    lower = word.lower()
    if lower in _NOT_COMPARATIVE or len(lower) <= 4:
        return False
    return lower.endswith("er") or lower.endswith("est")


class GrammarChecker:
    """Deterministic rule-based checker (article agreement, immediate
    duplicates, double comparatives). An external service conforming to the
    grammar wire protocol replaces it when configured."""

    def check(self, text: str) -> list[Violation]:
        tokens = [t for t in tokenize(text) if t.is_word]
        violations: list[Violation] = []
        for prev, nxt in zip(tokens, tokens[1:]):
            if prev.lower == "a" and _starts_with_vowel_sound(nxt.surface):
                violations.append(Violation("article", prev.start, nxt.end))
            elif prev.lower == "an" and not _starts_with_vowel_sound(nxt.surface):
                violations.append(Violation("article", prev.start, nxt.end))
            if prev.lower == nxt.lower:
                violations.append(Violation("duplicate_word", prev.start, nxt.end))
            if prev.lower in ("more", "most") and _looks_comparative(nxt.surface):
                violations.append(Violation("double_comparative", prev.start, nxt.end))
        return violations


class ProtocolGrammarChecker:
    """Client for the grammar wire protocol: {protocol_version, text} ->
    {violations: [{rule_id, span: [start, end]}...]}."""

    def __init__(self, transport):
        self.transport = transport

    def check(self, text: str) -> list[Violation]:
        response = self.transport.request(
            {"protocol_version": PROTOCOL_VERSION, "text": text}
        )
        raw = response.get("violations")
        if not isinstance(raw, list):
            raise ProtocolError("grammar response missing 'violations' list")
        out = []
        for entry in raw:
            try:
                span = entry.get("span", (0, 0))
                out.append(Violation(str(entry["rule_id"]), int(span[0]), int(span[1])))
            except (TypeError, KeyError, IndexError, ValueError) as exc:
                raise ProtocolError(f"malformed violation {entry!r}") from exc
        return out


def grammar_check(text: str, checker: GrammarChecker | ProtocolGrammarChecker | None = None) -> list[Violation]:
    return (checker or GrammarChecker()).check(text)


def _new_violations(before: list[Violation], after: list[Violation]) -> bool:
    # Compare rule counts, not spans: substitutions shift every downstream span.
    before_counts = Counter(v.rule_id for v in before)
    after_counts = Counter(v.rule_id for v in after)
    return any(after_counts[rule] > before_counts[rule] for rule in after_counts)


def admissible(original: Token, candidate: SynonymCandidate, sentence_before: str,
               sentence_after: str, cfg: ConstraintConfig, *,
               scorer: SimilarityScorer | None = None,
               grammar: GrammarChecker | ProtocolGrammarChecker | None = None) -> Decision:
    """Run the constraint stack for one substitution.

    ``sentence_before`` must be the unperturbed original text: similarity and
    the grammar delta are always measured against it, never against an
    intermediate perturbation. With every toggle off everything is admitted
    (the raw attack).
    """
    if cfg.use_stopwords and original.is_stopword:
        return Decision(admit=False, reason=REJECT_STOPWORD)
    if cfg.use_pos and candidate.pos != original.pos:
        return Decision(admit=False, reason=REJECT_POS)
    if cfg.sim_threshold is not None:
        if scorer is None:
            raise ValueError("sim_threshold enabled but no similarity scorer given")
        if scorer.similarity(sentence_before, sentence_after) < cfg.sim_threshold:
            return Decision(admit=False, reason=REJECT_SIMILARITY)
    if cfg.use_grammar:
        checker = grammar or GrammarChecker()
        if _new_violations(checker.check(sentence_before), checker.check(sentence_after)):
            return Decision(admit=False, reason=REJECT_GRAMMAR)
    return ADMIT
